"""Depth-limited CART regression trees grown by exact variance reduction."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import _split_py

if os.environ.get("PROBBOOST_PURE_PYTHON"):
    _best_split = _split_py.best_split
    BACKEND = "python"
else:
    try:
        from ._split import best_split as _best_split

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _best_split = _split_py.best_split
        BACKEND = "python"

LEAF = -1


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 3
    min_samples_split: int = 2

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be at least 2")


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Flat array encoding; ``left[i] == -1`` marks node ``i`` as a leaf.

    Samples with ``x[feature[i]] <= threshold[i]`` go to ``left[i]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.value)

    @property
    def depth(self) -> int:
        def walk(i):
            if self.left[i] == LEAF:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    @classmethod
    def constant(cls, value: float) -> "RegressionTree":
        return cls(
            feature=np.array([LEAF], dtype=np.intp),
            threshold=np.zeros(1),
            left=np.array([LEAF], dtype=np.intp),
            right=np.array([LEAF], dtype=np.intp),
            value=np.array([float(value)]),
        )

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return self.predict(X[None, :])[0]
        node = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        while True:
            inner = self.left[node] != LEAF
            if not inner.any():
                return self.value[node]
            r = rows[inner]
            nd = node[inner]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])

    def apply(self, X) -> np.ndarray:
        """Leaf id reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.intp)
        for _ in range(self.node_count):
            inner = self.left[node] != LEAF
            if not inner.any():
                break
            nd = node[inner]
            go_left = X[np.flatnonzero(inner), self.feature[nd]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])
        return node


def presort(X: np.ndarray) -> np.ndarray:
    """Per-feature stable sort order, shape ``(d, n)``; reusable across fits on the same rows."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T).astype(np.intp, copy=False)


def fit_tree(X, targets, cfg: TreeConfig = TreeConfig(), order: np.ndarray | None = None) -> RegressionTree:
    X = np.ascontiguousarray(X, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(targets) or len(X) == 0:
        raise ValueError("X must be a nonempty (n, d) matrix aligned with targets")
    if not np.all(np.isfinite(targets)):
        raise ValueError("tree targets must be finite")
    if order is None:
        order = presort(X)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def grow(order: np.ndarray, depth: int) -> int:
        node = len(value)
        ids = order[0]
        t = targets[ids]
        mean = math.fsum(t) / len(t)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(mean)
        if depth >= cfg.max_depth or len(ids) < cfg.min_samples_split or t.min() == t.max():
            return node
        j, thr, gain = _best_split(X, targets, order, mean)
        sse = float(np.dot(t - mean, t - mean))
        if j < 0 or not gain > 1e-12 * sse:
            return node
        goes_left = np.zeros(len(X), dtype=bool)
        goes_left[ids] = X[ids, j] <= thr
        mask = goes_left[order]
        n_left = int(mask[0].sum())
        d = order.shape[0]
        left_order = np.ascontiguousarray(order[mask].reshape(d, n_left))
        right_order = np.ascontiguousarray(order[~mask].reshape(d, len(ids) - n_left))
        feature[node] = j
        threshold[node] = thr
        left[node] = grow(left_order, depth + 1)
        right[node] = grow(right_order, depth + 1)
        return node

    grow(np.ascontiguousarray(order, dtype=np.intp), 0)
    return RegressionTree(
        feature=np.array(feature, dtype=np.intp),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.intp),
        right=np.array(right, dtype=np.intp),
        value=np.array(value, dtype=np.float64),
    )


def tree_predict(tree: RegressionTree, x) -> float | np.ndarray:
    return tree.predict(x)
