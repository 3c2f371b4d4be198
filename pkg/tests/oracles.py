"""Reference computations that share no code path with the package."""

import math

import numpy as np
from scipy import integrate


def gaussian_bin_masses_quad(a, b, k, mu, sigma):
    """Truncated-Gaussian bin masses by adaptive quadrature of the unnormalized pdf."""
    edges = [a + (b - a) * i / k for i in range(k + 1)]
    edges[-1] = b
    pdf = lambda t: math.exp(-((t - mu) ** 2) / (2.0 * sigma * sigma))
    masses = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        pts = [mu] if lo < mu < hi else None
        val, _ = integrate.quad(pdf, lo, hi, points=pts, epsabs=1e-15, epsrel=1e-13, limit=200)
        masses.append(val)
    masses = np.array(masses)
    return masses / masses.sum()


def central_difference(fun, x, h=1e-6):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def adam_scalar_reference(theta, grads, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    """Plain-float Adam recurrence on one scalar."""
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1**t)
        vh = v / (1 - b2**t)
        theta = theta - lr * mh / (math.sqrt(vh) + eps)
    return theta, m, v
