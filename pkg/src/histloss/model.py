"""Fully connected ReLU network with a softmax or scalar head.

Parameters are stored as a flat tuple ``(W0, b0, W1, b1, ..., W_head, b_head)``
with ``W`` of shape ``(fan_in, fan_out)`` so a layer is ``X @ W + b``. The same
ordering is used for gradients, optimizer state and checkpoints.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HEADS = ("softmax", "scalar", "scalar_from_softmax")

CHECKPOINT_MAGIC = b"HISTLOSS-NET"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden_dims: tuple[int, ...]
    head: str = "softmax"
    k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}, got {self.head!r}")
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("layer sizes must be positive")
        if self.head == "scalar":
            object.__setattr__(self, "k", 1)
        elif self.k < 2:
            raise ValueError(f"a softmax head needs k >= 2 bins, got {self.k}")

    @property
    def out_dim(self) -> int:
        return 1 if self.head == "scalar" else self.k

    @property
    def has_softmax(self) -> bool:
        return self.head != "scalar"

    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = (self.input_dim, *self.hidden_dims, self.out_dim)
        return list(zip(dims[:-1], dims[1:]))

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "head": self.head,
            "k": self.k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(d["input_dim"], tuple(d["hidden_dims"]), d.get("head", "softmax"), d.get("k", 1))


@dataclass(frozen=True)
class Network:
    arch: Architecture
    params: tuple[np.ndarray, ...]

    @property
    def weights(self) -> tuple[np.ndarray, ...]:
        return self.params[0::2]

    @property
    def biases(self) -> tuple[np.ndarray, ...]:
        return self.params[1::2]

    @property
    def n_hidden(self) -> int:
        return len(self.arch.hidden_dims)

    def head_slice(self) -> slice:
        return slice(len(self.params) - 2, len(self.params))

    def replace(self, params) -> "Network":
        params = tuple(params)
        if len(params) != len(self.params) or any(
            p.shape != q.shape for p, q in zip(params, self.params)
        ):
            raise ValueError("parameter shapes do not match the architecture")
        return Network(self.arch, params)


@dataclass
class ForwardTrace:
    """Everything kept from a forward pass that backprop needs.

    ``acts[0]`` is the (possibly dropped-out) input, ``acts[i]`` the output of
    hidden layer ``i``; ``phi`` is ``acts[-1]``. ``pre[i]`` is the
    pre-activation of hidden layer ``i + 1``.
    """

    acts: list[np.ndarray]
    pre: list[np.ndarray]
    logits: np.ndarray
    f: np.ndarray | None
    mask: np.ndarray | None

    @property
    def phi(self) -> np.ndarray:
        return self.acts[-1]

    @property
    def output(self) -> np.ndarray:
        """Raw head output: logits for softmax heads, ``yhat`` of shape (n,) for scalar."""
        if self.f is None:
            return self.logits[:, 0]
        return self.logits


def _hidden_seed_sequences(seed: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    body, head = np.random.SeedSequence(seed).spawn(2)
    return body, head


def init_network(arch: Architecture, seed: int) -> Network:
    """LeCun normal initialization, ``N(0, 1/fan_in)`` weights and zero biases.

    Hidden layers and the head draw from separate child streams, so two
    architectures sharing ``input_dim`` and ``hidden_dims`` get identical hidden
    weights for the same seed whatever their heads.
    """
    body_ss, head_ss = _hidden_seed_sequences(seed)
    body_rng = np.random.default_rng(body_ss)
    head_rng = np.random.default_rng(head_ss)
    shapes = arch.layer_shapes()
    params = []
    for i, (fan_in, fan_out) in enumerate(shapes):
        rng = head_rng if i == len(shapes) - 1 else body_rng
        params.append(rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return Network(arch, tuple(params))


def softmax(logits) -> np.ndarray:
    """Row-wise softmax with the max subtracted first."""
    b = np.asarray(logits, dtype=np.float64)
    z = b - b.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    b = np.asarray(logits, dtype=np.float64)
    z = b - b.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted dropout mask: 0 with probability ``rate``, else ``1/(1-rate)``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def forward(
    net: Network,
    x,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
    mask: np.ndarray | None = None,
) -> ForwardTrace:
    """Forward pass on one example ``(d,)`` or a batch ``(n, d)``.

    Training mode is ``dropout_rate > 0`` with an ``rng``, or an explicit
    ``mask``; dropout only touches the input layer. Without either the pass is
    deterministic (evaluation mode).
    """
    X = np.asarray(x, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != net.arch.input_dim:
        raise ValueError(f"expected inputs with {net.arch.input_dim} features, got shape {np.shape(x)}")
    if mask is None and dropout_rate > 0.0:
        if rng is None:
            raise ValueError("dropout in training mode needs an rng")
        mask = dropout_mask(X.shape, dropout_rate, rng)
    if mask is not None:
        if mask.shape != X.shape:
            raise ValueError("dropout mask shape does not match the inputs")
        X = X * mask
    acts = [X]
    pre = []
    W, b = net.weights, net.biases
    h = X
    for i in range(net.n_hidden):
        z = h @ W[i] + b[i]
        h = np.maximum(z, 0.0)
        pre.append(z)
        acts.append(h)
    logits = h @ W[-1] + b[-1]
    f = softmax(logits) if net.arch.has_softmax else None
    return ForwardTrace(acts=acts, pre=pre, logits=logits, f=f, mask=mask)


def backprop(net: Network, trace: ForwardTrace, dout, head_only: bool = False) -> list:
    """Gradients of ``sum_n dout[n] . output[n]`` for every parameter.

    ``dout`` is the loss gradient with respect to the logits (softmax heads,
    shape ``(n, k)``) or to ``yhat`` (scalar head, shape ``(n,)``). Averaging over
    a batch is the caller's job. With ``head_only`` the hidden-layer entries are
    ``None``.
    """
    g = np.asarray(dout, dtype=np.float64)
    if not net.arch.has_softmax and g.ndim == 1:
        g = g[:, None]
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != trace.logits.shape or len(trace.acts) != net.n_hidden + 1:
        raise ValueError("trace, gradient and network do not match")
    grads: list = [None] * len(net.params)
    W = net.weights
    grads[-2] = trace.phi.T @ g
    grads[-1] = g.sum(axis=0)
    if head_only:
        return grads
    delta = g @ W[-1].T
    for i in range(net.n_hidden - 1, -1, -1):
        delta = delta * (trace.pre[i] > 0.0)
        grads[2 * i] = trace.acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ W[i].T
    return grads


def extract_representation(net: Network, x) -> np.ndarray:
    """Last hidden activation in evaluation mode."""
    x = np.asarray(x, dtype=np.float64)
    phi = forward(net, x).phi
    return phi[0] if x.ndim == 1 else phi


def save_network(net: Network, path) -> None:
    """Write a checkpoint.

    Layout: the line ``HISTLOSS-NET <version>``, one line of JSON holding the
    architecture and the ordered array names and shapes, then every array as
    little-endian float64 in row-major order, back to back. The file is written
    to a temporary name and renamed into place.
    """
    path = Path(path)
    names = []
    for i in range(len(net.params) // 2):
        names += [f"W{i}", f"b{i}"]
    header = {
        "architecture": net.arch.to_dict(),
        "arrays": [{"name": n, "shape": list(p.shape)} for n, p in zip(names, net.params)],
    }
    payload = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in net.params)
    blob = (
        CHECKPOINT_MAGIC
        + f" {CHECKPOINT_VERSION}\n".encode()
        + json.dumps(header, sort_keys=True).encode()
        + b"\n"
        + payload
    )
    atomic_write_bytes(path, blob)


def load_network(path) -> Network:
    with open(path, "rb") as fh:
        first = fh.readline()
        magic, _, version = first.strip().partition(b" ")
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a histloss checkpoint")
        if int(version) != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {int(version)}")
        header = json.loads(fh.readline())
        data = fh.read()
    arch = Architecture.from_dict(header["architecture"])
    params = []
    offset = 0
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        params.append(arr.astype(np.float64))
        offset += 8 * count
    if offset != len(data):
        raise ValueError(f"{path}: trailing or missing bytes in checkpoint")
    net = init_network(arch, 0)
    return net.replace(params)


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
