"""Parametric outcome distributions on a (location, log-scale) axis.

Every function is vectorized: ``theta`` has shape ``(..., 2)`` with column 0
the location and column 1 the log of the scale, and broadcasts against the
outcome argument.
"""
from __future__ import annotations

import enum
import math

import numpy as np
from scipy import optimize, special

LOG_SCALE_MIN = -15.0
LOG_SCALE_MAX = 15.0

_LOG_2PI = math.log(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)
_SQRT_PI = math.sqrt(math.pi)


class Family(enum.Enum):
    NORMAL = "normal"
    LAPLACE = "laplace"

    @property
    def param_count(self) -> int:
        return 2

    @property
    def param_names(self) -> tuple[str, str]:
        if self is Family.NORMAL:
            return ("mu", "logsigma")
        return ("mu", "logb")


class Rule(enum.Enum):
    LOGSCORE = "logscore"
    CRPS = "crps"


class ConfigError(ValueError):
    """An unsupported combination of family, scoring rule or direction."""


def check_pair(family: Family, rule: Rule) -> None:
    if rule is Rule.CRPS and family is not Family.NORMAL:
        raise ConfigError(f"scoring rule {rule.value} is not supported with distribution {family.value}")


def as_params(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape[-1:] != (2,):
        raise ValueError(f"expected parameter vectors of length 2, got shape {theta.shape}")
    return theta


def clamp(theta: np.ndarray) -> np.ndarray:
    """Clip the log-scale column into the representable range (in place)."""
    np.clip(theta[..., 1], LOG_SCALE_MIN, LOG_SCALE_MAX, out=theta[..., 1])
    return theta


def std_normal_cdf(z):
    # erfc keeps full relative accuracy in the lower tail
    return 0.5 * special.erfc(-np.asarray(z, dtype=np.float64) / _SQRT2)


def std_normal_pdf(z):
    z = np.asarray(z, dtype=np.float64)
    return np.exp(-0.5 * z * z - 0.5 * _LOG_2PI)


def log_pdf(family: Family, theta, y):
    theta = as_params(theta)
    mu, log_scale = theta[..., 0], theta[..., 1]
    y = np.asarray(y, dtype=np.float64)
    if family is Family.NORMAL:
        z = (y - mu) * np.exp(-log_scale)
        return -log_scale - 0.5 * _LOG_2PI - 0.5 * z * z
    return -math.log(2.0) - log_scale - np.abs(y - mu) * np.exp(-log_scale)


def pdf(family: Family, theta, y):
    return np.exp(log_pdf(family, theta, y))


def cdf(family: Family, theta, z):
    theta = as_params(theta)
    mu, log_scale = theta[..., 0], theta[..., 1]
    w = (np.asarray(z, dtype=np.float64) - mu) * np.exp(-log_scale)
    if family is Family.NORMAL:
        return std_normal_cdf(w)
    # expm1 avoids cancellation near the median
    return np.where(w < 0, 0.5 * np.exp(np.minimum(w, 0.0)), 0.5 - 0.5 * np.expm1(-np.maximum(w, 0.0)))


def quantile(family: Family, theta, q):
    q = np.asarray(q, dtype=np.float64)
    if np.any((q <= 0) | (q >= 1) | ~np.isfinite(q)):
        raise ValueError("quantile levels must lie strictly between 0 and 1")
    theta = as_params(theta)
    mu, scale = theta[..., 0], np.exp(theta[..., 1])
    if family is Family.NORMAL:
        return mu + scale * special.ndtri(q)
    below = q < 0.5
    w = np.where(below, np.log(2.0 * np.where(below, q, 0.5)), -np.log(2.0 * (1.0 - np.where(below, 0.5, q))))
    return mu + scale * w


def point_estimate(family: Family, theta):
    """Distribution mean; both supported families are symmetric about mu."""
    return as_params(theta)[..., 0]


def metric(family: Family, rule: Rule, theta) -> np.ndarray:
    """Riemannian metric induced by ``rule``, shape ``(..., 2, 2)``.

    Closed forms in (location, log-scale) coordinates:

    * normal / log score: ``diag(1/sigma^2, 2)``
    * normal / CRPS: ``diag(1/(sigma sqrt(pi)), sigma/(2 sqrt(pi)))``
    * laplace / log score: ``diag(1/b^2, 1)``
    """
    check_pair(family, rule)
    theta = as_params(theta)
    log_scale = theta[..., 1]
    out = np.zeros(theta.shape[:-1] + (2, 2))
    if rule is Rule.CRPS:
        scale = np.exp(log_scale)
        out[..., 0, 0] = 1.0 / (scale * _SQRT_PI)
        out[..., 1, 1] = scale / (2.0 * _SQRT_PI)
    else:
        out[..., 0, 0] = np.exp(-2.0 * log_scale)
        out[..., 1, 1] = 2.0 if family is Family.NORMAL else 1.0
    return out


def fit_marginal(family: Family, rule: Rule, y) -> np.ndarray:
    """Single parameter vector minimizing the summed score over ``y``."""
    check_pair(family, rule)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("cannot fit a marginal distribution to an empty sample")
    if family is Family.LAPLACE:
        mu = float(np.median(y))
        spread = float(np.mean(np.abs(y - mu)))
    else:
        mu = float(np.mean(y))
        spread = float(np.std(y))
    theta = np.array([mu, math.log(spread) if spread > 0 else LOG_SCALE_MIN])
    clamp(theta)
    if rule is Rule.CRPS:
        theta = _fit_crps(y, theta)
    return theta


def _fit_crps(y: np.ndarray, start: np.ndarray) -> np.ndarray:
    from .scoring import score, score_grad

    if start[1] <= LOG_SCALE_MIN:
        return start

    def objective(t):
        theta = np.broadcast_to(t, (y.size, 2))
        return float(np.sum(score(Rule.CRPS, Family.NORMAL, theta, y))), np.sum(
            score_grad(Rule.CRPS, Family.NORMAL, theta, y), axis=0
        )

    res = optimize.minimize(
        objective,
        start,
        jac=True,
        method="L-BFGS-B",
        bounds=[(None, None), (LOG_SCALE_MIN, LOG_SCALE_MAX)],
        options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": 500},
    )
    return clamp(np.asarray(res.x, dtype=np.float64).copy())
