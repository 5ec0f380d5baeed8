"""Per-example descent directions: natural, ordinary and saddle-free Newton."""
from __future__ import annotations

import enum

import numpy as np

from .distributions import ConfigError, Family, Rule, as_params, check_pair, metric
from .scoring import score_grad

EIG_FLOOR = 1e-8
_DET_MIN = 1e-12


class Direction(enum.Enum):
    NATURAL = "natural"
    ORDINARY = "ordinary"
    SADDLE_FREE = "saddlefree"


def check_direction(kind: Direction, rule: Rule, family: Family) -> None:
    check_pair(family, rule)
    if kind is Direction.SADDLE_FREE and (rule is not Rule.LOGSCORE or family is not Family.NORMAL):
        raise ConfigError(
            f"direction {kind.value} is only implemented for the normal log score, "
            f"not {family.value}/{rule.value}"
        )


def solve_2x2(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Batched solve of ``mat @ x = rhs`` for symmetric 2x2 systems.

    Nearly singular systems get a small ridge of ``1e-9 * trace / 2``.
    """
    a = mat[..., 0, 0]
    b = mat[..., 0, 1]
    c = mat[..., 1, 0]
    d = mat[..., 1, 1]
    det = a * d - b * c
    weak = np.abs(det) < _DET_MIN
    if np.any(weak):
        ridge = np.where(weak, 1e-9 * (a + d) / 2.0, 0.0)
        a = a + ridge
        d = d + ridge
        det = a * d - b * c
    r0 = rhs[..., 0]
    r1 = rhs[..., 1]
    out = np.empty(np.broadcast(a, r0).shape + (2,))
    out[..., 0] = (d * r0 - b * r1) / det
    out[..., 1] = (a * r1 - c * r0) / det
    return out


def natural_gradient(rule: Rule, family: Family, theta, y) -> np.ndarray:
    theta = as_params(theta)
    return solve_2x2(metric(family, rule, theta), score_grad(rule, family, theta, y))


def hessian_logscore(family: Family, theta, y) -> np.ndarray:
    """Hessian of the normal log score in (mu, log sigma), shape ``(..., 2, 2)``."""
    if family is not Family.NORMAL:
        raise ConfigError("the log-score Hessian is only implemented for the normal family")
    theta = as_params(theta)
    mu, log_scale = theta[..., 0], theta[..., 1]
    resid = np.asarray(y, dtype=np.float64) - mu
    inv_var = np.exp(-2.0 * log_scale)
    out = np.empty(resid.shape + (2, 2))
    out[..., 0, 0] = inv_var
    out[..., 0, 1] = out[..., 1, 0] = 2.0 * resid * inv_var
    out[..., 1, 1] = 2.0 * resid * resid * inv_var
    return out


def saddle_free_newton(family: Family, theta, y) -> np.ndarray:
    grad = score_grad(Rule.LOGSCORE, family, theta, y)
    hess = hessian_logscore(family, theta, y)
    vals, vecs = np.linalg.eigh(hess)
    vals = np.maximum(np.abs(vals), EIG_FLOOR)
    # |H|^-1 g = V diag(1/|lambda|) V^T g
    proj = np.einsum("...ji,...j->...i", vecs, grad) / vals
    return np.einsum("...ij,...j->...i", vecs, proj)


def direction(kind: Direction, rule: Rule, family: Family, theta, y) -> np.ndarray:
    check_direction(kind, rule, family)
    if kind is Direction.NATURAL:
        return natural_gradient(rule, family, theta, y)
    if kind is Direction.ORDINARY:
        return score_grad(rule, family, theta, y)
    return saddle_free_newton(family, theta, y)
