"""Pure NumPy split search, used when the compiled kernel is unavailable."""
from __future__ import annotations

import numpy as np

# gains within this relative distance of the best one count as ties
TIE_RTOL = 1e-12


def best_split(X: np.ndarray, targets: np.ndarray, order: np.ndarray, mean: float):
    """Exact variance-reduction split over all features.

    ``order[j]`` lists the node's sample ids sorted by ``X[:, j]`` and
    ``mean`` is the node's target mean. Returns ``(feature, threshold, gain)``;
    ``feature`` is -1 when no feature has two distinct values.
    """
    d, m = order.shape
    if m < 2:
        return -1, 0.0, 0.0
    counts = np.arange(1, m, dtype=np.float64)
    rest = m - counts
    gains = np.empty((d, m - 1))
    for j in range(d):
        idx = order[j]
        vals = X[idx, j]
        csum = np.cumsum(targets[idx] - mean)
        total = csum[-1]
        left = csum[:-1]
        right = total - left
        g = left * left / counts + right * right / rest - total * total / m
        gains[j] = np.where(vals[1:] > vals[:-1], g, -np.inf)
    top = gains.max()
    if top == -np.inf:
        return -1, 0.0, 0.0
    j, k = np.argwhere(gains >= top - TIE_RTOL * abs(top))[0]
    idx = order[j]
    lo, hi = X[idx[k], j], X[idx[k + 1], j]
    threshold = 0.5 * (lo + hi)
    if not threshold < hi:
        threshold = lo
    return int(j), float(threshold), float(gains[j, k])
