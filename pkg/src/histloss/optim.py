"""Adam, global-norm gradient clipping and target-noise augmentation."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import Network


@dataclass(frozen=True)
class AdamState:
    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(net: Network, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    zeros = tuple(np.zeros_like(p) for p in net.params)
    return AdamState(m=zeros, v=tuple(np.zeros_like(p) for p in net.params), t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, net: Network, grads) -> tuple[AdamState, Network]:
    """One bias-corrected Adam update; returns fresh state and network.

    ``None`` gradient entries mark frozen parameters: they and their moments are
    carried over untouched.
    """
    if len(grads) != len(net.params) or len(state.m) != len(net.params):
        raise ValueError("gradient list does not match the network parameters")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(net.params, grads, state.m, state.v):
        if g is None:
            new_m.append(m)
            new_v.append(v)
            new_p.append(p)
            continue
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        new_m.append(m)
        new_v.append(v)
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return replace(state, m=tuple(new_m), v=tuple(new_v), t=t), net.replace(new_p)


def global_norm(grads) -> float:
    """Euclidean norm of all (non-``None``) gradient entries concatenated."""
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads if g is not None)))


def clip_gradients(grads, threshold: float) -> list:
    """Rescale so the global norm is at most ``threshold``."""
    if not threshold > 0:
        raise ValueError(f"clip threshold must be > 0, got {threshold}")
    norm = global_norm(grads)
    if norm <= threshold:
        return list(grads)
    scale = threshold / norm
    return [None if g is None else g * scale for g in grads]


def add_target_noise(y, std: float, rng: np.random.Generator):
    """``y + std * z`` with ``z`` standard normal; ``std = 0`` returns ``y`` unchanged."""
    if std < 0:
        raise ValueError(f"noise std must be >= 0, got {std}")
    if std == 0:
        return y
    y = np.asarray(y, dtype=np.float64)
    out = y + std * rng.standard_normal(y.shape)
    return float(out) if out.ndim == 0 else out
