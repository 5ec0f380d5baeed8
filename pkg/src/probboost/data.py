"""Tabular datasets: CSV ingestion and seeded synthetic fixtures."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]
    target_name: str = "y"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or len(X) != len(y):
            raise DataError("features must be (n, d) and targets (n,)")
        if len(y) < 1 or X.shape[1] < 1:
            raise DataError("a dataset needs at least one row and one feature")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        if len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names must match the number of feature columns")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @classmethod
    def from_arrays(cls, X, y, feature_names=None, target_name="y") -> "Dataset":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if feature_names is None:
            feature_names = tuple(f"x{j}" for j in range(X.shape[1]))
        return cls(X, np.asarray(y, dtype=np.float64), tuple(feature_names), target_name)

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.features[rows], self.targets[rows], self.feature_names, self.target_name)


def read_table(path, has_header: bool = True) -> tuple[list[str], np.ndarray]:
    """Parse a fully numeric CSV; returns (column names, values)."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r != []]
    if not rows:
        raise DataError(f"{path} is empty")
    if has_header:
        header, body, first = [h.strip() for h in rows[0]], rows[1:], 2
        seen = set()
        for name in header:
            if name in seen:
                raise DataError(f"duplicate column name {name!r}")
            seen.add(name)
    else:
        header, body, first = [f"col{j}" for j in range(len(rows[0]))], rows, 1
    if not body:
        raise DataError(f"{path} has no data rows")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body):
        line = i + first
        if len(row) != len(header):
            raise DataError(f"row {line} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            text = cell.strip()
            if text == "":
                raise DataError(f"empty cell at row {line}, column {header[j]!r}")
            try:
                v = float(text)
            except ValueError:
                raise DataError(f"non-numeric value {text!r} at row {line}, column {header[j]!r}") from None
            if not math.isfinite(v):
                raise DataError(f"non-finite value {text!r} at row {line}, column {header[j]!r}")
            values[i, j] = v
    return header, values


def _column_index(header: list[str], target) -> int:
    if isinstance(target, int) or (isinstance(target, str) and target.lstrip("-").isdigit() and target not in header):
        idx = int(target)
        if not -len(header) <= idx < len(header):
            raise DataError(f"target column index {idx} out of range for {len(header)} columns")
        return idx % len(header)
    if target not in header:
        raise DataError(f"target column {target!r} not found")
    return header.index(target)


def ingest_csv(path, target_column, has_header: bool = True) -> Dataset:
    """Load a numeric CSV; ``target_column`` is a header name or a 0-based index."""
    header, values = read_table(path, has_header)
    t = _column_index(header, target_column)
    if len(header) < 2:
        raise DataError("need at least one feature column besides the target")
    keep = [j for j in range(len(header)) if j != t]
    return Dataset(values[:, keep], values[:, t], tuple(header[j] for j in keep), header[t])


SYNTHETIC_KINDS = ("heteroscedastic", "homoscedastic", "linear", "scale-ramp")


def make_synthetic(kind: str, n: int, seed: int = 0) -> Dataset:
    """Seeded fixture datasets.

    heteroscedastic: x0, x1 ~ U(0, 1); y ~ N(10 x1, exp(2 x0 - 1)^2)
    homoscedastic:   x0, x1 ~ U(0, 1); y ~ N(10 x1, 1)
    linear:          x ~ U(0, 1);      y ~ N(x, 0.1^2)
    scale-ramp:      x ~ U(0, 1);      y ~ N(0, (1 + x)^2)
    """
    rng = np.random.default_rng(seed)
    if kind in ("heteroscedastic", "homoscedastic"):
        X = rng.uniform(0.0, 1.0, size=(n, 2))
        noise = rng.standard_normal(n)
        scale = np.exp(2.0 * X[:, 0] - 1.0) if kind == "heteroscedastic" else 1.0
        y = 10.0 * X[:, 1] + scale * noise
    elif kind == "linear":
        X = rng.uniform(0.0, 1.0, size=(n, 1))
        y = X[:, 0] + 0.1 * rng.standard_normal(n)
    elif kind == "scale-ramp":
        X = rng.uniform(0.0, 1.0, size=(n, 1))
        y = (1.0 + X[:, 0]) * rng.standard_normal(n)
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {SYNTHETIC_KINDS}")
    return Dataset.from_arrays(X, y)
