"""Conditional intensity, compensator and exact log-likelihood.

The stance-``k`` intensity is::

    lambda_k(t) = mu_k * T * f(t; x, T)
                  + sum_{t_j < t} delta[r_j] * gamma[k_j, k] * n_j * omega_k * exp(-omega_k (t - t_j))

with ``f`` the truncated-exponential density. Its closed-form integral gives
the compensator.

The default kernel mixes stances through ``gamma`` alone. Retweets copy the
stance of the tweet they share, so with ``retweet_inherits=True`` the weight
``gamma[k_j, k]`` is replaced by the effective transfer
``p_ret * 1{k_j = k} + (1 - p_ret) * gamma[k_j, k]``, which is the kernel the
simulator actually generates from. History sums use a one-pass exponential recursion over the
sorted event times, so evaluating at M sorted points costs O(N + M).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import truncexp
from .model import N_STANCES, Cascade, ModelParams, Stance


class DomainError(ValueError):
    """Evaluation time outside the observation window."""


class InvalidLikelihood(ValueError):
    """The intensity is not positive at an observed event."""


@dataclass(frozen=True)
class IntensityBreakdown:
    immigrant: np.ndarray
    excitation: np.ndarray
    total: float

    @property
    def per_stance(self) -> np.ndarray:
        return self.immigrant + self.excitation


def _check_time(t, T):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > T) or not np.all(np.isfinite(t)):
        raise DomainError(f"evaluation time must lie in [0, {T}]")
    return t


def immigrant_intensity(params: ModelParams, stance: Stance | int, t):
    """Background rate of stance-``stance`` originals; integrates to mu_k*T over [0, T]."""
    T = params.horizon
    t = _check_time(t, T)
    out = params.mu[int(stance)] * T * truncexp.pdf(t, params.x_scale, T)
    return float(out) if out.ndim == 0 else out


def effective_gamma(params: ModelParams, retweet_inherits: bool = False) -> np.ndarray:
    """Probability that a child of a stance-i parent has stance j."""
    if not retweet_inherits:
        return params.gamma
    p_ret = params.p_type[0]
    return p_ret * np.eye(N_STANCES) + (1.0 - p_ret) * params.gamma


def excitation_weights(params: ModelParams, cascade: Cascade, retweet_inherits: bool = False) -> np.ndarray:
    """(N, K) matrix of branching mass each event sends to each child stance.

    Row j is ``delta[r_j] * G[k_j, :] * n_j`` with ``G`` from
    :func:`effective_gamma`; rows sum to ``delta[r_j] * n_j``.
    """
    if len(cascade) == 0:
        return np.zeros((0, N_STANCES))
    gamma = effective_gamma(params, retweet_inherits)
    return (params.delta[cascade.types] * cascade.reach)[:, None] * gamma[cascade.stances]


def _history_sums(times, weights, omega, query):
    """Sums over events strictly before each query time.

    Returns ``(decayed, mass)`` with shape (M, K):
    ``decayed[m, k] = sum_{t_j < q_m} w[j, k] exp(-omega_k (q_m - t_j))`` and
    ``mass[m, k] = sum_{t_j < q_m} w[j, k]``.
    """
    query = np.asarray(query, dtype=float)
    M, K = query.size, len(omega)
    decayed = np.zeros((M, K))
    mass = np.zeros((M, K))
    if times.size == 0 or M == 0:
        return decayed, mass
    # inclusive state right after each event: A_j = A_{j-1} exp(-omega dt) + w_j
    state = np.empty_like(weights)
    acc = np.zeros(K)
    prev = times[0]
    for j in range(times.size):
        acc = acc * np.exp(-omega * (times[j] - prev)) + weights[j]
        state[j] = acc
        prev = times[j]
    cum = np.cumsum(weights, axis=0)
    n_before = np.searchsorted(times, query, side="left")
    has = n_before > 0
    last = n_before[has] - 1
    lag = query[has] - times[last]
    decayed[has] = state[last] * np.exp(-np.outer(lag, omega))
    mass[has] = cum[last]
    return decayed, mass


def intensity_curves(params: ModelParams, cascade: Cascade, t,
                     retweet_inherits: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Per-stance immigrant and excitation terms at times ``t``, each of shape (M, K)."""
    t = np.atleast_1d(_check_time(t, params.horizon))
    imm = np.stack([immigrant_intensity(params, k, t) for k in range(N_STANCES)], axis=1)
    w = excitation_weights(params, cascade, retweet_inherits)
    decayed, _ = _history_sums(cascade.times, w, params.omega, t)
    return imm, decayed * params.omega


def stance_intensity(params: ModelParams, cascade: Cascade, stance: Stance | int, t,
                     retweet_inherits: bool = False):
    imm, exc = intensity_curves(params, cascade, t, retweet_inherits)
    out = imm[:, int(stance)] + exc[:, int(stance)]
    return float(out[0]) if np.ndim(t) == 0 else out


def total_intensity(params: ModelParams, cascade: Cascade, t: float,
                    retweet_inherits: bool = False) -> IntensityBreakdown:
    imm, exc = intensity_curves(params, cascade, float(t), retweet_inherits)
    return IntensityBreakdown(immigrant=imm[0], excitation=exc[0], total=float(imm[0].sum() + exc[0].sum()))


def compensator(params: ModelParams, cascade: Cascade, t, retweet_inherits: bool = False):
    """Integrated total intensity over ``[0, t]``."""
    T = params.horizon
    tt = np.atleast_1d(_check_time(t, T))
    imm = params.mu.sum() * T * truncexp.cdf(tt, params.x_scale, T)
    w = excitation_weights(params, cascade, retweet_inherits)
    decayed, mass = _history_sums(cascade.times, w, params.omega, tt)
    out = imm + (mass - decayed).sum(axis=1)
    return float(out[0]) if np.ndim(t) == 0 else out


def event_intensities(params: ModelParams, cascade: Cascade, marked: bool = False,
                      retweet_inherits: bool = False) -> np.ndarray:
    """Intensity at each event time given the strictly earlier history.

    With ``marked=True`` the stance-specific intensity of the event's own
    stance is returned instead of the total.
    """
    if len(cascade) == 0:
        return np.zeros(0)
    imm, exc = intensity_curves(params, cascade, cascade.times, retweet_inherits)
    lam = imm + exc
    if marked:
        return lam[np.arange(len(cascade)), cascade.stances]
    return lam.sum(axis=1)


def log_likelihood(params: ModelParams, cascade: Cascade, marked: bool = False,
                   retweet_inherits: bool = False) -> float:
    """Exact log-likelihood ``sum_j log lambda(t_j) - Lambda(T)``.

    By default the total (ground) intensity is used at each event. The marked
    variant scores each event with the intensity of its own stance.
    """
    lam = event_intensities(params, cascade, marked=marked, retweet_inherits=retweet_inherits)
    if np.any(~(lam > 0)):
        j = int(np.flatnonzero(~(lam > 0))[0])
        raise InvalidLikelihood(f"intensity is {lam[j]} at event {cascade[j].id!r}")
    return float(np.log(lam).sum() - compensator(params, cascade, params.horizon, retweet_inherits))


def rescaled_interarrivals(params: ModelParams, cascade: Cascade,
                           retweet_inherits: bool = False) -> np.ndarray:
    """Compensator increments between consecutive events, starting from t = 0.

    Under the true model these are i.i.d. unit exponentials.
    """
    if len(cascade) == 0:
        return np.zeros(0)
    lam = compensator(params, cascade, cascade.times, retweet_inherits)
    return np.diff(np.concatenate([[0.0], lam]))


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float
    n: int


def ks_exponential(residuals) -> KSResult:
    """One-sample Kolmogorov-Smirnov test of residuals against Exp(1)."""
    residuals = np.asarray(residuals, dtype=float)
    res = stats.kstest(residuals, "expon")
    return KSResult(statistic=float(res.statistic), pvalue=float(res.pvalue), n=int(residuals.size))
