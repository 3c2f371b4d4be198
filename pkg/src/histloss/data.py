"""Dataset loading, splitting, standardization and minibatching."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

_MISSING = {"", "na", "nan", "null", "none", "?"}


class DataError(ValueError):
    """Raised for unreadable, malformed or mismatched dataset files."""


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str = "dataset"
    provenance: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataError(f"inconsistent shapes X{X.shape} y{y.shape}")
        if X.shape[0] == 0 or X.shape[1] == 0:
            raise DataError("dataset needs n > 0 rows and d > 0 features")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, idx, name: str | None = None) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], name or self.name, self.provenance)


@dataclass(frozen=True)
class CSVSchema:
    """Column layout of a CSV file.

    Columns are named when ``header`` is true and 0-based integers otherwise.
    ``feature_columns=None`` means every column except the target and
    ``drop_columns``.
    """

    target_column: str | int
    feature_columns: tuple | None = None
    drop_columns: tuple = ()
    delimiter: str = ","
    header: bool = True

    def to_dict(self) -> dict:
        return {
            "target_column": self.target_column,
            "feature_columns": None if self.feature_columns is None else list(self.feature_columns),
            "drop_columns": list(self.drop_columns),
            "delimiter": self.delimiter,
            "header": self.header,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CSVSchema":
        fc = d.get("feature_columns")
        return cls(
            target_column=d["target_column"],
            feature_columns=None if fc is None else tuple(fc),
            drop_columns=tuple(d.get("drop_columns", ())),
            delimiter=d.get("delimiter", ","),
            header=d.get("header", True),
        )


# Relative location of CT slices on axial axis (UCI). The file holds patientId,
# value0..value383 and the target "reference"; keeping patientId gives the
# 385 input features used by the original experiments.
CT_POSITION_SCHEMA = CSVSchema(target_column="reference")


def load_csv(path, schema: CSVSchema, name: str | None = None) -> Dataset:
    """Read a numeric CSV in file order. Errors name the offending line and column."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        if schema.header:
            try:
                columns = [c.strip() for c in next(reader)]
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            first_line = 2
        else:
            columns = None
            first_line = 1
        rows = list(reader)
    if columns is None:
        width = len(rows[0]) if rows else 0
        columns = list(range(width))
    index = {c: i for i, c in enumerate(columns)}

    def col(c):
        if c not in index:
            raise DataError(f"{path}: column {c!r} not found")
        return index[c]

    t = col(schema.target_column)
    dropped = {col(c) for c in schema.drop_columns}
    if schema.feature_columns is None:
        feats = [i for i in range(len(columns)) if i != t and i not in dropped]
    else:
        feats = [col(c) for c in schema.feature_columns]
    if not feats:
        raise DataError(f"{path}: no feature columns selected")

    values = np.empty((len(rows), len(columns)))
    for r, row in enumerate(rows):
        line = r + first_line
        if len(row) != len(columns):
            raise DataError(f"{path}: line {line} has {len(row)} fields, expected {len(columns)}")
        try:
            values[r] = [float(v) for v in row]
        except ValueError:
            for c, v in enumerate(row):
                if v.strip().lower() in _MISSING:
                    raise DataError(f"{path}: line {line}, column {columns[c]!r}: missing value") from None
                try:
                    float(v)
                except ValueError:
                    raise DataError(f"{path}: line {line}, column {columns[c]!r}: cannot parse {v!r}") from None
        if not np.all(np.isfinite(values[r])):
            c = int(np.flatnonzero(~np.isfinite(values[r]))[0])
            raise DataError(f"{path}: line {line}, column {columns[c]!r}: missing value")
    if len(rows) == 0:
        raise DataError(f"{path}: no data rows")
    return Dataset(values[:, feats], values[:, t], name or path.stem, provenance=str(path))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Manifest:
    """JSON record tying a dataset name to a file, its schema and checksum.

    Optional ``split`` is ``{"kind": "first_n", "n_train": N}`` or
    ``{"kind": "file", "path": ...}`` naming a text file of 0-based test row
    indices, one per line.
    """

    name: str
    path: str
    schema: CSVSchema
    sha256: str | None = None
    provenance: str = ""
    split: dict | None = None
    base_dir: Path = field(default=Path("."), repr=False)

    def resolve(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "path": self.path,
            "schema": self.schema.to_dict(),
            "sha256": self.sha256,
            "provenance": self.provenance,
        }
        if self.split is not None:
            d["split"] = self.split
        return d


def read_manifest(path) -> Manifest:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    d = json.loads(path.read_text())
    return Manifest(
        name=d["name"],
        path=d["path"],
        schema=CSVSchema.from_dict(d["schema"]),
        sha256=d.get("sha256"),
        provenance=d.get("provenance", ""),
        split=d.get("split"),
        base_dir=path.parent,
    )


def write_manifest(manifest: Manifest, path) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")


def load_from_manifest(manifest: Manifest, verify: bool = True) -> Dataset:
    data_path = manifest.resolve(manifest.path)
    if not data_path.is_file():
        raise DataError(f"dataset file not found: {data_path}")
    if verify and manifest.sha256:
        digest = sha256_file(data_path)
        if digest != manifest.sha256:
            raise DataError(f"checksum mismatch for {data_path}: expected {manifest.sha256}, got {digest}")
    ds = load_csv(data_path, manifest.schema, name=manifest.name)
    return Dataset(ds.X, ds.y, manifest.name, manifest.provenance or str(data_path))


def split(ds: Dataset, test_fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Seeded random train/test split. Each side keeps file order."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    perm = np.random.default_rng(seed).permutation(ds.n)
    n_test = int(round(ds.n * test_fraction))
    n_test = min(max(n_test, 1), ds.n - 1)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return ds.take(train_idx, ds.name), ds.take(test_idx, ds.name)


def split_first_n(ds: Dataset, n_train: int) -> tuple[Dataset, Dataset]:
    if not 0 < n_train < ds.n:
        raise ValueError(f"n_train must be in (0, {ds.n}), got {n_train}")
    return ds.take(np.arange(n_train)), ds.take(np.arange(n_train, ds.n))


def split_from_file(ds: Dataset, path) -> tuple[Dataset, Dataset]:
    """Fixed split from a file of 0-based test row indices."""
    test_idx = np.unique(np.loadtxt(path, dtype=np.int64, ndmin=1))
    if test_idx.size == 0 or test_idx[0] < 0 or test_idx[-1] >= ds.n:
        raise DataError(f"{path}: test indices out of range for {ds.n} rows")
    mask = np.zeros(ds.n, dtype=bool)
    mask[test_idx] = True
    return ds.take(np.flatnonzero(~mask)), ds.take(test_idx)


def subsample(ds: Dataset, n: int | None, seed) -> Dataset:
    """Seeded subset of ``n`` rows in file order; ``None`` or ``n >= ds.n`` keeps all."""
    if n is None or n >= ds.n:
        return ds
    idx = np.sort(np.random.default_rng(seed).permutation(ds.n)[:n])
    return ds.take(idx)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
        std = np.where(constant, 1.0, std)
        return cls(mean, std, constant)

    def apply(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.std
        # constant features pass through unchanged
        return np.where(self.constant, X, Z)


def standardize(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset, Standardizer]:
    """Zero mean, unit population variance from training statistics only."""
    st = Standardizer.fit(train.X)
    if st.constant.any():
        log.info("%d constant feature(s) left unscaled", int(st.constant.sum()))
    return (
        Dataset(st.apply(train.X), train.y, train.name, train.provenance),
        Dataset(st.apply(test.X), test.y, test.name, test.provenance),
        st,
    )


@dataclass(frozen=True)
class TargetTransform:
    mode: str = "identity"
    lo: float = 0.0
    hi: float = 1.0

    @classmethod
    def fit(cls, y, mode: str) -> "TargetTransform":
        if mode == "identity":
            return cls("identity")
        if mode != "minmax01":
            raise ValueError(f"unknown target mode {mode!r}")
        y = np.asarray(y, dtype=np.float64)
        lo, hi = float(y.min()), float(y.max())
        if hi <= lo:
            raise ValueError("degenerate target range: max equals min")
        return cls("minmax01", lo, hi)

    def forward(self, y):
        if self.mode == "identity":
            return np.asarray(y, dtype=np.float64)
        return (np.asarray(y, dtype=np.float64) - self.lo) / (self.hi - self.lo)

    def inverse(self, z):
        if self.mode == "identity":
            return np.asarray(z, dtype=np.float64)
        return np.asarray(z, dtype=np.float64) * (self.hi - self.lo) + self.lo


def transform_targets(y_train, y_test, mode: str):
    """Fit a target transform on training targets and apply it to both sides."""
    tt = TargetTransform.fit(y_train, mode)
    return tt.forward(y_train), tt.forward(y_test), tt


def minibatches(n: int, batch_size: int, rng) -> list[np.ndarray]:
    """One epoch of index batches from a fresh permutation; the last may be short."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    perm = rng.permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


def make_synthetic(n: int = 2000, d: int = 32, seed: int = 0, noise: float = 0.05) -> Dataset:
    """Smooth nonlinear regression problem with targets in [0, 100].

    A latent position ``t`` in [0, 1] (a two-component beta mixture, so the
    targets are unevenly spread) drives every feature through a random
    sinusoid; the target is ``100 * t``. Useful as a stand-in when no real
    dataset is at hand.
    """
    rng = np.random.default_rng(seed)
    comp = rng.random(n) < 0.6
    t = np.where(comp, rng.beta(2.0, 5.0, n), rng.beta(6.0, 2.0, n))
    freq = rng.uniform(1.0, 12.0, d)
    phase = rng.uniform(0.0, 2 * np.pi, d)
    amp = rng.uniform(0.5, 2.0, d)
    X = amp * np.sin(np.outer(t, freq) + phase) + noise * rng.standard_normal((n, d))
    return Dataset(X, 100.0 * t, name="synthetic", provenance=f"make_synthetic(n={n}, d={d}, seed={seed})")
