"""Run configuration, the training loop and per-epoch instrumentation."""

from __future__ import annotations

import dataclasses
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import data as D
from ..binning import make_bin_grid, project, support_from_targets
from ..losses import LossSpec, ProjectionCache, loss_eval, predict_from_trace
from ..model import Architecture, Network, atomic_write_bytes, backprop, forward, init_network
from ..optim import adam_init, adam_step, add_target_noise, clip_gradients

log = logging.getLogger(__name__)

LOSS_NAMES = ("hl_gaussian", "hl_onebin", "hl_uniform", "l2", "l1", "l2_softmax", "l2_noise", "l2_clip")

# Order of the child streams spawned from the master seed. Appending new
# streams at the end keeps existing ones unchanged.
SEED_STREAMS = ("split", "subsample", "init", "batches", "dropout", "noise", "instrument")


def derive_seeds(master: int) -> dict[str, np.random.SeedSequence]:
    children = np.random.SeedSequence(master).spawn(len(SEED_STREAMS))
    return dict(zip(SEED_STREAMS, children))


def _stream_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


class TrainingError(RuntimeError):
    pass


@dataclass
class RunConfig:
    loss: str = "hl_gaussian"
    hidden_dims: tuple = (192, 192, 192, 192)
    epochs: int = 150
    batch_size: int = 256
    lr: float = 1e-3
    dropout: float = 0.05
    seed: int = 0
    bins: int = 100
    support: tuple | None = None
    support_padding: float = 0.0
    sigma_scale: float = 1.0
    sigma: float | None = None
    eps: float = 1e-3
    noise_std: float = 1e-3
    resample_noise: bool = True
    clip_threshold: float = 1.0
    test_fraction: float = 0.2
    n_train: int | None = None
    n_test: int | None = None
    instrument: bool = True
    patience: int | None = None
    dataset: str | None = None
    name: str = ""

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if self.support is not None:
            self.support = (float(self.support[0]), float(self.support[1]))
        if self.loss not in LOSS_NAMES:
            raise ValueError(f"loss must be one of {LOSS_NAMES}, got {self.loss!r}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        d["support"] = None if self.support is None else list(self.support)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @property
    def uses_histogram(self) -> bool:
        return self.loss.startswith("hl_") or self.loss == "l2_softmax"


@dataclass(frozen=True)
class Metrics:
    objective: float
    mae: float
    rmse: float


@dataclass
class SplitData:
    train: D.Dataset
    test: D.Dataset
    standardizer: D.Standardizer | None = None


def prepare(config: RunConfig, dataset: D.Dataset, fixed_split=None) -> SplitData:
    """Split (seeded or fixed), subsample and standardize features.

    Depends only on the master seed and the data fields of ``config``, so every
    loss run with one seed sees the same rows.
    """
    seeds = derive_seeds(config.seed)
    if fixed_split is None:
        train, test = D.split(dataset, config.test_fraction, seeds["split"])
    else:
        train, test = fixed_split
    sub_tr, sub_te = seeds["subsample"].spawn(2)
    train = D.subsample(train, config.n_train, sub_tr)
    test = D.subsample(test, config.n_test, sub_te)
    train, test, st = D.standardize(train, test)
    return SplitData(train, test, st)


def build_loss(config: RunConfig, y_train) -> tuple[LossSpec, D.TargetTransform]:
    """Loss spec and target transform for a run.

    HL bins cover the raw-unit support; every other loss trains on targets
    min-max scaled to [0, 1], where the softmax-mean variant also puts its grid.
    """
    y_train = np.asarray(y_train, dtype=np.float64)
    name = config.loss
    if name.startswith("hl_"):
        a, b = config.support if config.support is not None else support_from_targets(y_train, config.support_padding)
        grid = make_bin_grid(a, b, config.bins)
        if name == "hl_gaussian":
            sigma = config.sigma if config.sigma is not None else config.sigma_scale * grid.width
            spec = LossSpec.hl_gaussian(grid, sigma)
        elif name == "hl_onebin":
            spec = LossSpec.hl_onebin(grid)
        else:
            spec = LossSpec.hl_uniform(grid, config.eps)
        return spec, D.TargetTransform("identity")
    tt = D.TargetTransform.fit(y_train, "minmax01")
    if name == "l2_softmax":
        return LossSpec("l2_softmax", grid=make_bin_grid(0.0, 1.0, config.bins)), tt
    if name == "l2_noise":
        return LossSpec("l2_noise", noise_std=config.noise_std), tt
    if name == "l2_clip":
        return LossSpec("l2_clip", clip_threshold=config.clip_threshold), tt
    return LossSpec(name), tt


def architecture_for(config: RunConfig, input_dim: int, loss: LossSpec) -> Architecture:
    k = loss.grid.k if loss.grid is not None else 1
    return Architecture(input_dim, config.hidden_dims, loss.head, k)


def error_metrics(pred, y) -> tuple[float, float]:
    """(MAE, RMSE) of predictions against targets."""
    r = np.asarray(pred, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return float(np.mean(np.abs(r))), float(np.sqrt(np.mean(r * r)))


def evaluate(net: Network, loss: LossSpec, transform: D.TargetTransform, X, y_raw, p=None) -> Metrics:
    """Objective under the run's loss plus MAE/RMSE in raw target units.

    Histogram heads predict the histogram mean; scalar heads predict directly.
    Either way the prediction is mapped back through ``transform``.
    """
    trace = forward(net, X)
    y_model = transform.forward(y_raw)
    values, _ = loss_eval(loss, trace, y_model, p=p)
    pred = transform.inverse(predict_from_trace(loss, trace))
    mae, rmse = error_metrics(pred, y_raw)
    return Metrics(float(np.mean(values)), mae, rmse)


def grad_norm_last_layer(net: Network, loss: LossSpec, X, y_model, p=None) -> tuple[float, float]:
    """Norm of the batch-mean loss gradient for the head weight matrix.

    Returns ``(norm, bound)``. For HL the bound is the batch mean of
    ``||phi|| * sum_i |p_i - f_i|``, which the norm can never exceed; other
    losses report ``nan`` as bound.
    """
    trace = forward(net, X)
    _, dout = loss_eval(loss, trace, y_model, p=p)
    n = trace.phi.shape[0]
    grads = backprop(net, trace, dout / n, head_only=True)
    norm = float(np.linalg.norm(grads[-2]))
    if loss.kind != "hl":
        return norm, math.nan
    if p is None:
        p = np.atleast_2d(project(loss.grid, y_model, loss.target))
    tv = np.sum(np.abs(p - trace.f), axis=1)
    bound = float(np.mean(np.linalg.norm(trace.phi, axis=1) * tv))
    return norm, bound


@dataclass
class EpochRecord:
    epoch: int
    train: Metrics
    test: Metrics
    head_grad_norm: float = math.nan
    head_grad_bound: float = math.nan


HISTORY_COLUMNS = (
    "epoch",
    "train_objective",
    "train_mae",
    "train_rmse",
    "test_objective",
    "test_mae",
    "test_rmse",
    "head_grad_norm",
    "head_grad_bound",
)


@dataclass
class RunHistory:
    config: RunConfig
    records: list[EpochRecord] = field(default_factory=list)
    checkpoint: str | None = None

    def column(self, name: str) -> np.ndarray:
        rows = [_record_row(r) for r in self.records]
        i = HISTORY_COLUMNS.index(name)
        return np.array([row[i] for row in rows], dtype=np.float64)

    @property
    def final(self) -> EpochRecord | None:
        return self.records[-1] if self.records else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(HISTORY_COLUMNS) + "\n")
        for r in self.records:
            buf.write(",".join(_fmt(v) for v in _record_row(r)) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        atomic_write_bytes(Path(path), self.to_csv().encode())

    def prop1_head_bound_holds(self) -> bool:
        """Every instrumented epoch's head-gradient norm is within its bound."""
        ok = True
        for r in self.records:
            if not math.isnan(r.head_grad_bound):
                ok &= r.head_grad_norm <= r.head_grad_bound * (1 + 1e-12) + 1e-15
        return bool(ok)

    def summary(self) -> dict:
        fin = self.final
        return {
            "config": self.config.to_dict(),
            "epochs_completed": len(self.records),
            "final": None
            if fin is None
            else {"train": dataclasses.asdict(fin.train), "test": dataclasses.asdict(fin.test)},
            "checks": {
                "metrics_finite": all(
                    all(math.isfinite(v) for v in (*dataclasses.astuple(r.train), *dataclasses.astuple(r.test)))
                    for r in self.records
                ),
                "prop1_head_bound": self.prop1_head_bound_holds(),
            },
            "checkpoint": self.checkpoint,
        }


def _record_row(r: EpochRecord) -> tuple:
    return (
        r.epoch,
        r.train.objective,
        r.train.mae,
        r.train.rmse,
        r.test.objective,
        r.test.mae,
        r.test.rmse,
        r.head_grad_norm,
        r.head_grad_bound,
    )


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_json(path, obj) -> None:
    atomic_write_bytes(Path(path), (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def train(
    config: RunConfig,
    data: SplitData,
    net: Network | None = None,
    trainable: str = "all",
) -> tuple[Network, RunHistory]:
    """Train one network and record per-epoch metrics.

    ``net`` overrides the seeded initialization (used by the representation
    experiments). ``trainable="head"`` freezes every hidden layer. The run is a
    pure function of ``config``, ``data`` and ``net``.
    """
    if trainable not in ("all", "head"):
        raise ValueError("trainable must be 'all' or 'head'")
    seeds = derive_seeds(config.seed)
    loss, tt = build_loss(config, data.train.y)
    Xtr, Xte = data.train.X, data.test.X
    ytr_raw, yte_raw = data.train.y, data.test.y
    ytr, yte = tt.forward(ytr_raw), tt.forward(yte_raw)
    p_tr = p_te = None
    if loss.kind == "hl":
        p_tr = ProjectionCache(loss.grid, loss.target, ytr)
        p_te = ProjectionCache(loss.grid, loss.target, yte)

    arch = architecture_for(config, data.train.d, loss)
    if net is None:
        net = init_network(arch, _stream_int(seeds["init"]))
    elif net.arch != arch:
        raise ValueError(f"supplied network {net.arch} does not match run architecture {arch}")

    batch_rng = np.random.default_rng(seeds["batches"])
    drop_rng = np.random.default_rng(seeds["dropout"])
    noise_rng = np.random.default_rng(seeds["noise"])
    instr_rng = np.random.default_rng(seeds["instrument"])
    fixed_noise = None
    if loss.kind == "l2_noise" and not config.resample_noise:
        fixed_noise = config.noise_std * noise_rng.standard_normal(ytr.shape)

    adam = adam_init(net, lr=config.lr)
    history = RunHistory(config)
    head_only = trainable == "head"
    best = (math.inf, net, 0)

    for epoch in range(1, config.epochs + 1):
        for b, idx in enumerate(D.minibatches(data.train.n, config.batch_size, batch_rng)):
            yb = ytr[idx]
            if loss.kind == "l2_noise":
                yb = yb + fixed_noise[idx] if fixed_noise is not None else add_target_noise(yb, loss.noise_std, noise_rng)
            trace = forward(net, Xtr[idx], config.dropout, drop_rng)
            values, dout = loss_eval(loss, trace, yb, p=None if p_tr is None else p_tr[idx])
            if not np.all(np.isfinite(values)):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b} ({config.loss})")
            grads = backprop(net, trace, dout / len(idx), head_only=head_only)
            if loss.kind == "l2_clip":
                grads = clip_gradients(grads, loss.clip_threshold)
            adam, net = adam_step(adam, net, grads)

        tr = evaluate(net, loss, tt, Xtr, ytr_raw, None if p_tr is None else p_tr.all)
        te = evaluate(net, loss, tt, Xte, yte_raw, None if p_te is None else p_te.all)
        rec = EpochRecord(epoch, tr, te)
        if config.instrument:
            m = min(config.batch_size, data.train.n)
            idx = np.sort(instr_rng.choice(data.train.n, size=m, replace=False))
            rec.head_grad_norm, rec.head_grad_bound = grad_norm_last_layer(
                net, loss, Xtr[idx], ytr[idx], None if p_tr is None else p_tr[idx]
            )
        history.records.append(rec)
        log.debug("%s seed=%d epoch=%d test_mae=%.5f", config.loss, config.seed, epoch, te.mae)

        if config.patience is not None:
            if te.mae < best[0]:
                best = (te.mae, net, epoch)
            elif epoch - best[2] >= config.patience:
                net = best[1]
                break
    return net, history
