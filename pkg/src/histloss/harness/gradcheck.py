"""Finite-difference verification of backprop and the HL gradient-norm bound."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..binning import Gaussian, OneBin, UniformMix, make_bin_grid, project
from ..losses import LossSpec, loss_eval, prop1_bound
from ..model import Architecture, Network, backprop, dropout_mask, forward, init_network

FD_STEP = 1e-6
REL_TOL = 1e-5
ABS_TOL = 1e-9
KINK_MARGIN = 1e-4

GRADCHECK_LOSSES = ("hl_gaussian", "hl_onebin", "hl_uniform", "l2", "l1", "l2_softmax")


@dataclass
class Trial:
    loss: LossSpec
    net: Network
    X: np.ndarray
    y: np.ndarray
    p: np.ndarray | None = None
    mask: np.ndarray | None = None

    def objective(self, net: Network) -> float:
        trace = forward(net, self.X, mask=self.mask)
        values, _ = loss_eval(self.loss, trace, self.y, p=self.p)
        return float(np.mean(values))

    def analytic(self) -> list[np.ndarray]:
        trace = forward(self.net, self.X, mask=self.mask)
        _, dout = loss_eval(self.loss, trace, self.y, p=self.p)
        return backprop(self.net, trace, dout / self.X.shape[0])


def numeric_gradient(trial: Trial, h: float = FD_STEP) -> list[np.ndarray]:
    """Central differences of the mean batch loss for every parameter entry."""
    params = [p.copy() for p in trial.net.params]
    out = []
    for j, P in enumerate(params):
        g = np.empty_like(P)
        flat, gflat = P.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = trial.objective(trial.net.replace(params))
            flat[i] = orig - h
            down = trial.objective(trial.net.replace(params))
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        out.append(g)
    return out


def _loss_for(kind: str, k: int, rng) -> LossSpec:
    grid = make_bin_grid(float(rng.uniform(-2, 0)), float(rng.uniform(0.5, 2)), k)
    if kind == "hl_gaussian":
        return LossSpec("hl", Gaussian(grid.width * float(rng.uniform(0.3, 3))), grid)
    if kind == "hl_onebin":
        return LossSpec("hl", OneBin(), grid)
    if kind == "hl_uniform":
        return LossSpec("hl", UniformMix(float(rng.uniform(0, 1.0 / k))), grid)
    if kind == "l2_softmax":
        return LossSpec("l2_softmax", grid=grid)
    return LossSpec(kind)


def random_trial(kind: str, rng: np.random.Generator, stationary: bool = False) -> Trial:
    """Random small network (at most 4 hidden layers of 16 units) and batch.

    Draws are repeated until no ReLU pre-activation and no L1 residual lies
    within ``KINK_MARGIN`` of a kink, where finite differences are meaningless.
    ``stationary`` sets the HL target equal to the prediction, so the true
    gradient is exactly zero.
    """
    while True:
        k = int(rng.integers(2, 9))
        loss = _loss_for(kind, k, rng)
        depth = int(rng.integers(1, 5))
        hidden = tuple(int(h) for h in rng.integers(2, 17, size=depth))
        d = int(rng.integers(1, 9))
        arch = Architecture(d, hidden, loss.head, k if loss.head != "scalar" else 1)
        net = init_network(arch, int(rng.integers(2**31)))
        # non-zero biases keep units alive and exercise the bias gradients
        net = net.replace([p + rng.normal(0, 0.1, p.shape) if i % 2 else p for i, p in enumerate(net.params)])
        n = int(rng.integers(1, 5))
        X = rng.normal(size=(n, d))
        mask = dropout_mask(X.shape, 0.2, rng) if rng.random() < 0.3 else None
        trace = forward(net, X, mask=mask)
        if any(np.min(np.abs(z)) < KINK_MARGIN for z in trace.pre):
            continue
        if loss.grid is not None:
            y = rng.uniform(loss.grid.a, loss.grid.b, size=n)
        else:
            y = rng.normal(size=n)
        p = None
        if loss.kind == "hl":
            p = np.atleast_2d(project(loss.grid, y, loss.target))
            if stationary:
                p = trace.f.copy()
        if loss.kind == "l1" and np.min(np.abs(trace.output - y)) < KINK_MARGIN:
            continue
        return Trial(loss, net, X, y, p, mask)


def compare(analytic, numeric) -> tuple[float, float]:
    """(relative error over all parameters, max absolute entry error)."""
    a = np.concatenate([g.ravel() for g in analytic])
    n = np.concatenate([g.ravel() for g in numeric])
    diff = np.linalg.norm(a - n)
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    rel = 0.0 if scale == 0 else float(diff / scale)
    return rel, float(np.max(np.abs(a - n)))


@dataclass
class GradcheckReport:
    trials: list[dict] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        rel = [t["rel_error"] for t in self.trials if not t["stationary"]]
        return max(rel, default=0.0)

    @property
    def max_abs_error_stationary(self) -> float:
        return max((t["abs_error"] for t in self.trials if t["stationary"]), default=0.0)

    @property
    def passed(self) -> bool:
        return all(t["passed"] for t in self.trials)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_trials": len(self.trials),
            "max_rel_error": self.max_rel_error,
            "max_abs_error_stationary": self.max_abs_error_stationary,
            "rel_tol": REL_TOL,
            "abs_tol": ABS_TOL,
            "fd_step": FD_STEP,
            "trials": self.trials,
        }


def gradcheck_suite(trials: int, seed: int, corrupt: float = 1.0, include_stationary: bool = True) -> GradcheckReport:
    """Check backprop against central differences on random configurations.

    Losses cycle through HL-Gaussian, HL-OneBin, HL-Uniform, L2, L1 and
    L2-softmax. A trial passes when the relative error is below ``1e-5``; where
    the analytic gradient is exactly zero (the stationary HL trial added when
    ``include_stationary``) every entry must instead be within ``1e-9``.
    ``corrupt`` scales the analytic gradients to confirm the check can fail.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    report = GradcheckReport()
    plan = [(GRADCHECK_LOSSES[i % len(GRADCHECK_LOSSES)], False) for i in range(trials)]
    if include_stationary:
        plan.append(("hl_gaussian", True))
    for i, (kind, stationary) in enumerate(plan):
        trial = random_trial(kind, rng, stationary=stationary)
        analytic = [g * corrupt for g in trial.analytic()]
        numeric = numeric_gradient(trial)
        rel, abs_err = compare(analytic, numeric)
        zero = all(not np.any(g) for g in analytic)
        ok = abs_err < ABS_TOL if zero else rel < REL_TOL
        report.trials.append(
            {
                "index": i,
                "loss": kind,
                "hidden_dims": list(trial.net.arch.hidden_dims),
                "batch": int(trial.X.shape[0]),
                "dropout": trial.mask is not None,
                "stationary": bool(zero),
                "rel_error": rel,
                "abs_error": abs_err,
                "passed": bool(ok),
            }
        )
    return report


def prop1_measure(net: Network, x, p) -> dict:
    """Measured full-parameter HL gradient norm and the local bound at one example.

    The Lipschitz term is the largest norm of the hidden-parameter gradient of
    a single logit. The head bias is treated as a weight on a constant input,
    so the representation norm uses ``[phi, 1]``.
    """
    if net.arch.head != "softmax":
        raise ValueError("the bound applies to a softmax head")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] != 1:
        raise ValueError("measure one example at a time")
    p = np.atleast_2d(p)
    trace = forward(net, x)
    f = trace.f
    grads = backprop(net, trace, f - p)
    full = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    head = float(np.sqrt(np.sum(grads[-2] ** 2) + np.sum(grads[-1] ** 2)))
    lip = 0.0
    k = f.shape[1]
    for i in range(k):
        e = np.zeros((1, k))
        e[0, i] = 1.0
        gi = backprop(net, trace, e)[:-2]
        lip = max(lip, float(np.sqrt(sum(float(np.sum(g * g)) for g in gi))))
    phi_aug = np.append(trace.phi[0], 1.0)
    tv = float(np.sum(np.abs(p - f)))
    return {
        "grad_norm": full,
        "head_grad_norm": head,
        "lipschitz": lip,
        "bound": prop1_bound(p, f, phi_aug, lip),
        "head_bound": float(np.linalg.norm(phi_aug)) * tv,
    }
