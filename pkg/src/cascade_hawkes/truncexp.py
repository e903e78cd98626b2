"""Exponential distribution with scale ``x`` truncated to ``[0, T]``."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq


def pdf(t, x: float, T: float):
    t = np.asarray(t, dtype=float)
    return np.exp(-t / x) / (x * -np.expm1(-T / x))


def logpdf(t, x: float, T: float):
    t = np.asarray(t, dtype=float)
    return -t / x - np.log(x) - np.log(-np.expm1(-T / x))


def cdf(t, x: float, T: float):
    t = np.clip(np.asarray(t, dtype=float), 0.0, T)
    return np.expm1(-t / x) / np.expm1(-T / x)


def ppf(u, x: float, T: float):
    u = np.asarray(u, dtype=float)
    a = T / x
    low = -x * np.log1p(u * np.expm1(-a))
    # upper quantiles: log((1 - u) + u e^{-a}) avoids cancellation near u = 1
    with np.errstate(divide="ignore"):
        high = -x * np.logaddexp(np.log1p(-u), np.log(u) - a)
    return np.clip(np.where(u <= 0.5, low, high), 0.0, T)


def mean(x: float, T: float) -> float:
    return _mean_from_rate(1.0 / x, T)


def _mean_from_rate(rate: float, T: float) -> float:
    z = rate * T
    if z < 1e-3:
        # series of 1/rate - T/expm1(z) around z = 0
        return T * (0.5 - z / 12 + z**3 / 720)
    if z > 700:
        return 1.0 / rate
    return 1.0 / rate - T / np.expm1(z)


def sample(rng: np.random.Generator, size, x: float, T: float) -> np.ndarray:
    return ppf(rng.random(size), x, T)


class ScaleNotIdentified(ValueError):
    """The weighted score equation has no root for a finite positive scale."""


def fit_scale(times, weights, T: float, tol: float = 1e-10) -> float:
    """Weighted maximum-likelihood scale of the truncated exponential.

    Maximizes ``sum_j w_j log pdf(t_j; x, T)`` over ``x > 0``. The score
    equation reduces to matching the truncated mean to the weighted sample
    mean, which is monotone in ``x``; the root is found with Brent's method.

    Raises:
        ScaleNotIdentified: if the weighted mean is not inside ``(0, T/2)``;
            at or beyond ``T/2`` the likelihood increases without bound in x.
    """
    times = np.asarray(times, dtype=float)
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if not total > 0:
        raise ScaleNotIdentified("total weight must be positive")
    m = float(np.dot(weights, times) / total)
    if not 0 < m < T / 2:
        raise ScaleNotIdentified(
            f"weighted mean time {m:.6g} must lie in (0, T/2 = {T / 2:.6g}) for a finite scale"
        )

    def score(x):
        return _mean_from_rate(1.0 / x, T) - m

    # truncated mean < x always, so score(m) < 0; it tends to T/2 - m > 0 as x grows
    hi = 10.0 * T
    while score(hi) <= 0:
        hi *= 10.0
        if hi > 1e300:
            raise ScaleNotIdentified("could not bracket the score root")
    return float(brentq(score, m, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))
