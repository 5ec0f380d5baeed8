"""Proper scoring rules: the logarithmic score and the CRPS."""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .distributions import (
    Family,
    Rule,
    as_params,
    check_pair,
    log_pdf,
    std_normal_cdf,
    std_normal_pdf,
)

_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


def score(rule: Rule, family: Family, theta, y):
    """Score of the forecast ``theta`` for outcome ``y`` (lower is better)."""
    check_pair(family, rule)
    if rule is Rule.LOGSCORE:
        return -log_pdf(family, theta, y)
    theta = as_params(theta)
    mu, log_scale = theta[..., 0], theta[..., 1]
    scale = np.exp(log_scale)
    w = (np.asarray(y, dtype=np.float64) - mu) / scale
    return scale * (w * (2.0 * std_normal_cdf(w) - 1.0) + 2.0 * std_normal_pdf(w) - _INV_SQRT_PI)


def score_grad(rule: Rule, family: Family, theta, y) -> np.ndarray:
    """Gradient of :func:`score` with respect to ``theta``, shape ``(..., 2)``."""
    check_pair(family, rule)
    theta = as_params(theta)
    mu, log_scale = theta[..., 0], theta[..., 1]
    y = np.asarray(y, dtype=np.float64)
    resid = y - mu
    inv_scale = np.exp(-log_scale)
    shape = np.broadcast(mu, y).shape
    out = np.empty(shape + (2,))
    if rule is Rule.CRPS:
        w = resid * inv_scale
        out[..., 0] = -(2.0 * std_normal_cdf(w) - 1.0)
        out[..., 1] = np.exp(log_scale) * (2.0 * std_normal_pdf(w) - _INV_SQRT_PI)
    elif family is Family.NORMAL:
        z = resid * inv_scale
        out[..., 0] = -z * inv_scale
        out[..., 1] = 1.0 - z * z
    else:
        # sign(0) = 0 keeps mu stationary when it sits exactly on y
        out[..., 0] = -np.sign(resid) * inv_scale
        out[..., 1] = 1.0 - np.abs(resid) * inv_scale
    return out


def total_score(rule: Rule, family: Family, theta, y) -> float:
    return float(np.sum(score(rule, family, theta, y)))


def divergence(rule: Rule, family: Family, theta_q, theta_p) -> float:
    """Excess expected score of forecast P over the truth Q (normal family).

    For the log score this is the KL divergence in closed form; for the CRPS
    the expectation over Q of the score difference is integrated numerically.
    """
    check_pair(family, rule)
    if family is not Family.NORMAL:
        raise ValueError("divergence is only available for the normal family")
    tq = as_params(theta_q).astype(np.float64)
    tp = as_params(theta_p).astype(np.float64)
    if np.array_equal(tq, tp):
        return 0.0
    mu_q, s_q = float(tq[0]), math.exp(tq[1])
    mu_p, s_p = float(tp[0]), math.exp(tp[1])
    if rule is Rule.LOGSCORE:
        kl = math.log(s_p / s_q) + (s_q**2 + (mu_q - mu_p) ** 2) / (2.0 * s_p**2) - 0.5
        return max(kl, 0.0)

    def integrand(w):
        y = mu_q + s_q * w
        excess = score(rule, family, tp, y) - score(rule, family, tq, y)
        return float(std_normal_pdf(w) * excess)

    value, _ = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return max(value, 0.0)
