"""Histogram Loss and the baseline regression losses.

Every loss returns per-example values together with the gradient of each
value with respect to the network output: logits for softmax heads, the
scalar prediction for scalar heads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binning import (
    BinGrid,
    Gaussian,
    OneBin,
    TargetSpec,
    UniformMix,
    expected_value,
    project,
    project_dataset,
)
from .model import ForwardTrace

LOSS_KINDS = ("hl", "l2", "l1", "l2_softmax", "l2_noise", "l2_clip")


@dataclass(frozen=True)
class LossSpec:
    kind: str
    target: TargetSpec | None = None
    grid: BinGrid | None = None
    noise_std: float = 0.0
    clip_threshold: float | None = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"loss kind must be one of {LOSS_KINDS}, got {self.kind!r}")
        needs_grid = self.kind in ("hl", "l2_softmax")
        if needs_grid != (self.grid is not None):
            raise ValueError(f"loss {self.kind!r} {'requires' if needs_grid else 'takes no'} grid")
        if self.kind == "hl" and self.target is None:
            raise ValueError("histogram loss needs a target distribution")
        if self.kind == "l2_noise" and self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.kind == "l2_clip" and not (self.clip_threshold and self.clip_threshold > 0):
            raise ValueError("l2_clip needs a positive clip_threshold")
        if isinstance(self.target, UniformMix) and self.grid is not None and self.target.eps >= 1.0 / self.grid.k:
            raise ValueError("uniform-mix eps must be below 1/k")

    @property
    def head(self) -> str:
        if self.kind == "hl":
            return "softmax"
        if self.kind == "l2_softmax":
            return "scalar_from_softmax"
        return "scalar"

    @property
    def target_mode(self) -> str:
        """Target transform the loss trains on: HL bins live in raw units."""
        return "identity" if self.kind == "hl" else "minmax01"

    @property
    def label(self) -> str:
        if self.kind == "hl":
            name = {Gaussian: "hl_gaussian", OneBin: "hl_onebin", UniformMix: "hl_uniform"}
            return name[type(self.target)]
        return self.kind

    @classmethod
    def hl_gaussian(cls, grid: BinGrid, sigma: float | None = None) -> "LossSpec":
        return cls("hl", Gaussian(grid.width if sigma is None else sigma), grid)

    @classmethod
    def hl_onebin(cls, grid: BinGrid) -> "LossSpec":
        return cls("hl", OneBin(), grid)

    @classmethod
    def hl_uniform(cls, grid: BinGrid, eps: float) -> "LossSpec":
        return cls("hl", UniformMix(eps), grid)


def hl_loss(p, f) -> np.ndarray | float:
    """Cross-entropy ``-sum_i p_i log f_i``; bins with ``p_i = 0`` add exactly 0.

    Row-wise for 2-D inputs. A zero ``f_i`` under positive ``p_i`` yields
    ``inf`` and is left for the caller to report.
    """
    p = np.asarray(p, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    logf = np.zeros(np.broadcast(p, f).shape)
    with np.errstate(divide="ignore"):
        np.log(f, out=logf, where=p > 0)
    out = -np.sum(p * logf, axis=-1)
    return float(out) if out.ndim == 0 else out


def hl_grad_logits(p, f) -> np.ndarray:
    """Gradient of the cross-entropy through a softmax: ``f - p``."""
    return np.asarray(f, dtype=np.float64) - np.asarray(p, dtype=np.float64)


def l2_loss(yhat, y):
    r = np.asarray(yhat, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return r * r, 2.0 * r


def l1_loss(yhat, y):
    """Absolute error and its subgradient, taken as 0 at an exact fit."""
    r = np.asarray(yhat, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return np.abs(r), np.sign(r)


def l2_softmax_loss(f, grid: BinGrid, y):
    """Squared error of the histogram mean, with its gradient in the logits.

    With ``m = sum_i f_i c_i`` and ``r = m - y`` the value is ``r**2`` and
    ``d/d b_i = 2 r f_i (c_i - m)``.
    """
    f = np.asarray(f, dtype=np.float64)
    m = f @ grid.centers
    r = m - np.asarray(y, dtype=np.float64)
    grad = 2.0 * np.expand_dims(r, -1) * f * (grid.centers - np.expand_dims(m, -1))
    return r * r, grad


def _check_head(spec: LossSpec, trace: ForwardTrace) -> None:
    softmax_head = trace.f is not None
    wants_softmax = spec.head != "scalar"
    if softmax_head != wants_softmax:
        raise ValueError(f"loss {spec.label!r} is incompatible with this network head")
    if wants_softmax and trace.f.shape[-1] != spec.grid.k:
        raise ValueError(f"head has {trace.f.shape[-1]} outputs but the grid has {spec.grid.k} bins")


def loss_eval(spec: LossSpec, trace: ForwardTrace, y, p=None):
    """Per-example loss values and output gradients for a batch.

    ``y`` is in the loss's own target units. For HL, ``p`` may carry cached
    projections of ``y``; otherwise they are computed here. Noise and clipping
    variants evaluate as plain squared error; their extras live in training.
    """
    _check_head(spec, trace)
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if spec.kind == "hl":
        if p is None:
            p = np.atleast_2d(project(spec.grid, y, spec.target))
        return np.atleast_1d(hl_loss(p, trace.f)), hl_grad_logits(p, trace.f)
    if spec.kind == "l2_softmax":
        return l2_softmax_loss(trace.f, spec.grid, y)
    if spec.kind == "l1":
        return l1_loss(trace.output, y)
    return l2_loss(trace.output, y)


def predict_from_trace(spec: LossSpec, trace: ForwardTrace) -> np.ndarray:
    """Point predictions in the loss's target units."""
    _check_head(spec, trace)
    if trace.f is not None:
        return expected_value(spec.grid, trace.f)
    return trace.output


def prop1_bound(p, f, phi, lip: float) -> float:
    """Local gradient-norm bound ``(lip + ||phi||) * sum_i |p_i - f_i|``."""
    if lip < 0:
        raise ValueError("Lipschitz constant must be >= 0")
    tv = float(np.sum(np.abs(np.asarray(p, dtype=np.float64) - np.asarray(f, dtype=np.float64))))
    return (lip + float(np.linalg.norm(phi))) * tv


class ProjectionCache:
    """Target projections computed once per training set and reused every epoch.

    Targets outside the grid are clamped into it (with a warning) first.
    """

    def __init__(self, grid: BinGrid, target: TargetSpec, y):
        self.grid = grid
        self.target = target
        p = np.atleast_2d(project_dataset(grid, np.asarray(y, dtype=np.float64), target))
        p.setflags(write=False)
        self._p = p

    def __len__(self) -> int:
        return self._p.shape[0]

    def __getitem__(self, idx) -> np.ndarray:
        return self._p[idx]

    @property
    def all(self) -> np.ndarray:
        return self._p
