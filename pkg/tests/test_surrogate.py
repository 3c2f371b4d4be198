"""The CT comparison checks, run end to end on the synthetic stand-in at toy scale.

Orderings are not asserted here except where this dataset reliably shows them;
the point is that every code path the CT criteria use works.
"""

import numpy as np
import pytest

from histloss.data import make_synthetic
from histloss.harness import RunConfig

import desk


@pytest.fixture(scope="module")
def runs():
    base = RunConfig(hidden_dims=(32, 32), epochs=8, batch_size=128, support=(0.0, 100.0), bins=50, lr=3e-3)
    return desk.Runs(make_synthetic(1500, 16, seed=0), base, seeds=(0, 1))


def test_table1_check(runs):
    ok, text = desk.check_table1_ordering(runs)
    assert isinstance(ok, bool) and "HL-G<l2 2/2" in text


def test_gradient_stability_check(runs):
    ok, text = desk.check_gradient_stability(runs)
    assert isinstance(ok, bool) and text.count("s0:") == 1
    cfg = runs.run("l2", 0, dropout=0.0)[1].config
    assert cfg.dropout == 0.0


def test_representation_check(runs):
    ok, text = desk.check_representation(runs)
    assert isinstance(ok, bool) and text.startswith("random HL-G")


def test_sweep_check(runs):
    ok, text = desk.check_sweep_robustness(runs, bins=(10, 25), sigmas=(0.5, 2.0))
    assert isinstance(ok, bool) and text.count("=") == 4


def test_runs_are_cached(runs):
    assert runs.run("l2", 0) is runs.run("l2", 0)
    assert runs.data(1) is runs.data(1)


def test_ct_loader(tmp_path, monkeypatch):
    monkeypatch.delenv(desk.CT_ENV, raising=False)
    with pytest.raises(pytest.fail.Exception, match=desk.CT_ENV):
        desk.load_ct()
    monkeypatch.setenv(desk.CT_ENV, str(tmp_path / "absent.csv"))
    with pytest.raises(pytest.fail.Exception, match="absent.csv"):
        desk.load_ct()
    rng = np.random.default_rng(0)
    header = ["patientId"] + [f"value{i}" for i in range(384)] + ["reference"]
    lines = [",".join(header)]
    for r in range(20):
        lines.append(",".join([str(r % 3)] + [f"{v:.4f}" for v in rng.random(384)] + [f"{rng.uniform(0, 100):.3f}"]))
    path = tmp_path / "slice_localization_data.csv"
    path.write_text("\n".join(lines) + "\n")
    monkeypatch.setenv(desk.CT_ENV, str(path))
    ds = desk.load_ct()
    assert (ds.n, ds.d) == (20, 385) and ds.name == "ct_position"
