"""Baselines and the comparison experiments built on :func:`train`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import Network, init_network
from .training import (
    Metrics,
    RunConfig,
    RunHistory,
    SplitData,
    _stream_int,
    architecture_for,
    build_loss,
    derive_seeds,
    error_metrics,
    train,
)

OLS_JITTER = 1e-10
REPR_MODES = ("fixed", "initialized", "random")


def median_normalize(series) -> np.ndarray:
    """Divide a series by its median."""
    s = np.asarray(series, dtype=np.float64)
    if s.size == 0:
        raise ValueError("cannot normalize an empty series")
    med = float(np.median(s))
    if not med > 0:
        raise ValueError(f"median must be positive, got {med}")
    return s / med


def iqr(series) -> float:
    q75, q25 = np.percentile(np.asarray(series, dtype=np.float64), [75, 25])
    return float(q75 - q25)


def ols_fit(X, y) -> np.ndarray:
    """Least-squares weights with an intercept appended as the last entry.

    Solves the normal equations with ``1e-10`` added to the Gram diagonal.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if n < d + 1:
        raise ValueError(f"need at least {d + 1} rows for {d} features plus intercept, got {n}")
    A = np.hstack([X, np.ones((n, 1))])
    G = A.T @ A
    G[np.diag_indices_from(G)] += OLS_JITTER
    try:
        w = np.linalg.solve(G, A.T @ y)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"normal equations singular beyond jitter: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise np.linalg.LinAlgError("normal equations produced non-finite weights")
    return w


def ols_predict(w, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X @ w[:-1] + w[-1]


@dataclass(frozen=True)
class BaselineResult:
    weights: np.ndarray
    train: Metrics
    test: Metrics


def run_ols(data: SplitData) -> BaselineResult:
    """Linear regression on the standardized features; objective is MSE in raw units."""
    w = ols_fit(data.train.X, data.train.y)
    out = []
    for ds in (data.train, data.test):
        mae, rmse = error_metrics(ols_predict(w, ds.X), ds.y)
        out.append(Metrics(rmse * rmse, mae, rmse))
    return BaselineResult(w, out[0], out[1])


@dataclass
class ReprResult:
    mode: str
    history: RunHistory
    network: Network
    source_history: RunHistory | None = None

    @property
    def test(self) -> Metrics:
        return self.history.final.test

    @property
    def train(self) -> Metrics:
        return self.history.final.train


def representation_experiment(
    mode: str,
    source: RunConfig | None,
    target: RunConfig,
    data: SplitData,
    source_net: Network | None = None,
) -> ReprResult:
    """Retrain a head on a transferred, copied or random hidden representation.

    ``fixed`` trains ``source`` (unless ``source_net`` is given), freezes its
    hidden layers and trains only a fresh ``target`` head. ``initialized`` copies
    the hidden layers as a starting point and trains everything. ``random``
    freezes the seeded random hidden layers of ``target`` and trains the head;
    hidden layers depend only on the seed, so two losses sharing a seed share
    the same random representation.
    """
    if mode not in REPR_MODES:
        raise ValueError(f"mode must be one of {REPR_MODES}, got {mode!r}")
    loss, _ = build_loss(target, data.train.y)
    arch = architecture_for(target, data.train.d, loss)
    fresh = init_network(arch, _stream_int(derive_seeds(target.seed)["init"]))
    if mode == "random":
        net, hist = train(target, data, net=fresh, trainable="head")
        return ReprResult(mode, hist, net)

    src_hist = None
    if source_net is None:
        if source is None:
            raise ValueError(f"mode {mode!r} needs a source config or network")
        source_net, src_hist = train(source, data)
    if source_net.arch.hidden_dims != arch.hidden_dims or source_net.arch.input_dim != arch.input_dim:
        raise ValueError("source and target networks must share their hidden shape")
    hidden = source_net.params[:-2]
    start = fresh.replace((*hidden, *fresh.params[-2:]))
    net, hist = train(target, data, net=start, trainable="head" if mode == "fixed" else "all")
    return ReprResult(mode, hist, net, src_hist)


SWEEP_AXES = ("bins", "sigma")


@dataclass
class SweepPoint:
    axis: str
    value: float
    history: RunHistory

    @property
    def test(self) -> Metrics:
        return self.history.final.test

    @property
    def train(self) -> Metrics:
        return self.history.final.train


def sweep(template: RunConfig, axis: str, values, data: SplitData) -> list[SweepPoint]:
    """One full run per axis value, every run with the template's seed.

    ``bins`` sets the bin count; ``sigma`` sets the target width as a multiple
    of the bin width.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    points = []
    for v in values:
        if axis == "bins":
            cfg = template.replace(bins=int(v))
        else:
            if not v > 0:
                raise ValueError(f"sigma scale must be > 0, got {v}")
            cfg = template.replace(sigma_scale=float(v), sigma=None)
        _, hist = train(cfg, data)
        points.append(SweepPoint(axis, float(v), hist))
    return points


def sweep_table(points: list[SweepPoint]) -> str:
    """CSV text with one row per sweep value."""
    lines = ["axis,value,train_mae,train_rmse,test_mae,test_rmse"]
    for pt in points:
        tr, te = pt.train, pt.test
        lines.append(f"{pt.axis},{pt.value!r},{tr.mae!r},{tr.rmse!r},{te.mae!r},{te.rmse!r}")
    return "\n".join(lines) + "\n"
