"""Histogram supports and projection of scalar targets onto them.

A target ``y`` becomes a probability vector ``p`` over ``k`` uniform bins
covering ``[a, b]``. Three target distributions are supported: a truncated
Gaussian centred at ``y``, a Dirac delta (all mass in the containing bin) and
a delta mixed with a uniform floor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import special

_SQRT2 = math.sqrt(2.0)
_ERF_SATURATION = 6.0
_MIN_MASS = 1e-300


@dataclass(frozen=True)
class BinGrid:
    """Uniform partition of ``[a, b]`` into ``k`` bins."""

    a: float
    b: float
    k: int
    width: float = field(init=False)
    edges: np.ndarray = field(init=False, repr=False, compare=False)
    centers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a, b, k = float(self.a), float(self.b), int(self.k)
        if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
            raise ValueError(f"bin support needs finite a < b, got [{a}, {b}]")
        if k < 1:
            raise ValueError(f"bin count must be >= 1, got {k}")
        width = (b - a) / k
        edges = a + width * np.arange(k + 1, dtype=np.float64)
        edges[-1] = b
        centers = edges[:-1] + width / 2.0
        edges.setflags(write=False)
        centers.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "centers", centers)


def make_bin_grid(a: float, b: float, k: int) -> BinGrid:
    return BinGrid(a, b, k)


def support_from_targets(y, padding: float = 0.0) -> tuple[float, float]:
    """Support ``[min - padding*range, max + padding*range]`` of training targets."""
    y = np.asarray(y, dtype=np.float64)
    lo, hi = float(y.min()), float(y.max())
    span = hi - lo
    if span <= 0:
        raise ValueError("targets have zero range; cannot derive a bin support")
    return lo - padding * span, hi + padding * span


@dataclass(frozen=True)
class Gaussian:
    """Truncated Gaussian target with standard deviation ``sigma`` (target units)."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class OneBin:
    """Dirac target: all mass in the bin containing ``y``."""


@dataclass(frozen=True)
class UniformMix:
    """Dirac target mixed with a uniform floor of ``eps`` per off-peak bin."""

    eps: float

    def __post_init__(self):
        if not self.eps >= 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")


TargetSpec = Union[Gaussian, OneBin, UniformMix]


def erf(x):
    """Error function, odd by construction and saturated to +-1 past |x| = 6.

    Accepts scalars or arrays; returns the same shape.
    """
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.where(ax > _ERF_SATURATION, 1.0, special.erf(ax))
    out = np.copysign(out, x)
    if out.ndim == 0:
        return float(out)
    return out


def locate_bin(grid: BinGrid, y):
    """Index of the bin holding ``y``.

    Bins are half-open ``[l_i, l_{i+1})`` except the last, which is closed.
    Values outside the support go to the nearest end bin.
    """
    y = np.asarray(y, dtype=np.float64)
    idx = np.floor((y - grid.a) / grid.width)
    idx = np.clip(idx, 0, grid.k - 1).astype(np.int64)
    # floor division can land one bin off right at an edge; fix against the stored edges
    idx = np.where((idx < grid.k - 1) & (y >= grid.edges[np.minimum(idx + 1, grid.k)]), idx + 1, idx)
    idx = np.where((idx > 0) & (y < grid.edges[idx]), idx - 1, idx)
    if idx.ndim == 0:
        return int(idx)
    return idx


def project_gaussian(grid: BinGrid, y, sigma: float) -> np.ndarray:
    """Bin masses of a Gaussian centred at ``y`` truncated to the support.

    ``y`` may be a scalar (returns shape ``(k,)``) or an array of shape
    ``(n,)`` (returns ``(n, k)``).
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    y = np.asarray(y, dtype=np.float64)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    cdf = erf((grid.edges[None, :] - y[:, None]) / (_SQRT2 * sigma))
    cdf = np.atleast_2d(cdf)
    mass = cdf[:, -1] - cdf[:, 0]
    if np.any(mass < 2.0 * _MIN_MASS):
        bad = y[mass < 2.0 * _MIN_MASS]
        raise ValueError(
            f"target mass outside [{grid.a}, {grid.b}] for y={bad[:5].tolist()} at sigma={sigma}"
        )
    p = np.diff(cdf, axis=1) / mass[:, None]
    # rounding can leave -0.0 or 1e-17 negatives where erf saturates
    np.maximum(p, 0.0, out=p)
    return p[0] if scalar else p


def project_onebin(grid: BinGrid, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    idx = np.atleast_1d(locate_bin(grid, y))
    p = np.zeros((idx.size, grid.k))
    p[np.arange(idx.size), idx] = 1.0
    return p[0] if y.ndim == 0 else p


def project_uniform_mix(grid: BinGrid, y, eps: float) -> np.ndarray:
    """``eps`` on every off-peak bin and ``1 - (k-1)*eps`` on the containing bin."""
    if not (0.0 <= eps < 1.0 / grid.k):
        raise ValueError(f"eps must lie in [0, 1/k) = [0, {1.0 / grid.k}), got {eps}")
    y = np.asarray(y, dtype=np.float64)
    idx = np.atleast_1d(locate_bin(grid, y))
    p = np.full((idx.size, grid.k), eps)
    p[np.arange(idx.size), idx] = 1.0 - (grid.k - 1) * eps
    return p[0] if y.ndim == 0 else p


def project(grid: BinGrid, y, target: TargetSpec) -> np.ndarray:
    """Dispatch to the projection matching ``target``."""
    if isinstance(target, Gaussian):
        return project_gaussian(grid, y, target.sigma)
    if isinstance(target, OneBin):
        return project_onebin(grid, y)
    if isinstance(target, UniformMix):
        return project_uniform_mix(grid, y, target.eps)
    raise TypeError(f"unknown target spec {target!r}")


def project_dataset(grid: BinGrid, y, target: TargetSpec) -> np.ndarray:
    """Project a whole target vector, clamping out-of-support values first.

    Clamped values are counted and reported with a single warning.
    """
    y = np.asarray(y, dtype=np.float64)
    outside = int(np.count_nonzero((y < grid.a) | (y > grid.b)))
    if outside:
        warnings.warn(
            f"{outside} target(s) outside [{grid.a}, {grid.b}] clamped before projection",
            stacklevel=2,
        )
        y = np.clip(y, grid.a, grid.b)
    return project(grid, y, target)


def expected_value(grid: BinGrid, f) -> np.ndarray | float:
    """Mean of the histogram density, ``sum_i f_i * c_i`` (row-wise for 2-D ``f``)."""
    out = np.asarray(f, dtype=np.float64) @ grid.centers
    if np.ndim(out) == 0:
        return float(out)
    return out
