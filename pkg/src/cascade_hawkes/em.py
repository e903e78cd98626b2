"""Expectation-maximization for the marked cascade model.

Each event j is either an immigrant (weight ``a_j = mu[k_j] T f(t_j)``) or the
child of an earlier event l (weight
``b_jl = delta[r_l] c(l, j) n_l omega[k_j] exp(-omega[k_j] (t_j - t_l))``).
The stance factor ``c`` is ``gamma[k_l, k_j]`` for quotes and replies. For
retweets it is 1 when the stances agree and 0 otherwise, since a retweet
carries its parent's stance. With this choice the closed-form updates below
maximize the expected complete-data log-likelihood exactly, and every
iteration increases the Jensen bound.

The integral of each event's excitation is taken over ``[t_l, inf)`` rather
than ``[t_l, T]``. That is accurate when the window extends well past the
last burst of activity. ``EMConfig.exact_decay`` switches the decay and
influence updates to the finite-window form.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from . import truncexp
from .intensity import log_likelihood
from .model import DESCENDANT_TYPES, N_STANCES, N_TYPES, Cascade, ModelParams, TweetType

log = logging.getLogger(__name__)

HISTORY_MODES = ("full", "network")
IMMIGRANT_MODES = ("mixture", "typed")


class DegenerateParams(ValueError):
    """An event has zero probability under every branching explanation."""


class FitAborted(RuntimeError):
    """The objective became non-finite; ``report`` holds the state so far."""

    def __init__(self, message: str, report: "FitReport"):
        super().__init__(message)
        self.report = report


@dataclass
class Responsibilities:
    """Posterior branching structure.

    ``immigrant[j]`` is p_jj; ``ancestors[j, l]`` is p_jl for earlier events l.
    Entries below ``1e-12 / N`` are dropped from the sparse matrix.
    """

    immigrant: np.ndarray
    ancestors: sparse.csr_matrix

    def __len__(self) -> int:
        return self.immigrant.size

    def row_sums(self) -> np.ndarray:
        return self.immigrant + np.asarray(self.ancestors.sum(axis=1)).ravel()

    def entropy(self) -> float:
        p = np.concatenate([self.immigrant, self.ancestors.data])
        p = p[p > 0]
        return float(-(p * np.log(p)).sum())


@dataclass
class EMConfig:
    epsilon: float = 1e-6
    max_iters: int = 500
    history_mode: str = "full"
    init: str | ModelParams = "default"
    x_solver_tol: float = 1e-10
    exact_decay: bool = False
    retweet_inherits: bool = True
    immigrants: str = "typed"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.history_mode not in HISTORY_MODES:
            raise ValueError(f"history_mode must be one of {HISTORY_MODES}")
        if self.immigrants not in IMMIGRANT_MODES:
            raise ValueError(f"immigrants must be one of {IMMIGRANT_MODES}")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "max_iters": self.max_iters,
            "history_mode": self.history_mode,
            "init": self.init if isinstance(self.init, str) else self.init.to_dict(),
            "x_solver_tol": self.x_solver_tol,
            "exact_decay": self.exact_decay,
            "retweet_inherits": self.retweet_inherits,
            "immigrants": self.immigrants,
        }


@dataclass
class FitReport:
    """Outcome of :func:`fit`.

    ``q_trace`` holds the Jensen lower bound after every M-step, i.e. the
    expected complete-data log-likelihood plus the additive term that does not
    depend on the parameters (the entropy of the responsibilities). It is
    nondecreasing. ``m_step_gains`` holds the increase of the expected
    complete-data log-likelihood produced by each M-step at fixed
    responsibilities.
    """

    params: ModelParams
    q_trace: list[float]
    loglik: float
    iterations: int
    converged: bool
    m_step_gains: list[float] = field(default_factory=list)
    working_loglik: float = float("nan")
    init_params: ModelParams | None = None
    flags: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "q_trace": list(map(float, self.q_trace)),
            "m_step_gains": list(map(float, self.m_step_gains)),
            "loglik": float(self.loglik),
            "working_loglik": float(self.working_loglik),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "flags": list(self.flags),
            "init_params": None if self.init_params is None else self.init_params.to_dict(),
            "config": self.config,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(_finite_or_none(self.to_dict()), indent=indent)


def _finite_or_none(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite_or_none(v) for v in obj]
    return obj


def _immigrant_weights(params: ModelParams, cascade: Cascade) -> np.ndarray:
    T = params.horizon
    return params.mu[cascade.stances] * T * truncexp.pdf(cascade.times, params.x_scale, T)


def _stance_factor(params, k_parent, k_child, r_child, retweet_inherits):
    c = params.gamma[k_parent, k_child]
    if retweet_inherits:
        same = (k_parent == k_child).astype(float)
        c = np.where(r_child == TweetType.RETWEET, same, c)
    return c


def e_step(
    params: ModelParams,
    cascade: Cascade,
    *,
    retweet_inherits: bool = True,
    immigrants: str = "typed",
    restrict: bool = False,
) -> Responsibilities:
    """Posterior probabilities of immigrant status and of each candidate parent.

    Candidate parents of event j are the events strictly earlier in time; with
    ``restrict=True`` they are further limited to ``cascade.admissible[j]``
    when that entry is set. In ``"typed"`` immigrant mode only originals are
    immigrants and only descendants have parents (a descendant with no
    candidate parent falls back to immigrant).

    Raises:
        DegenerateParams: an event has zero total weight.
    """
    N = len(cascade)
    if N == 0:
        return Responsibilities(np.zeros(0), sparse.csr_matrix((0, 0)))
    t, k, r, n = cascade.times, cascade.stances, cascade.types, cascade.reach
    a = _immigrant_weights(params, cascade)
    source = params.delta[r] * n
    n_before = np.searchsorted(t, t, side="left")
    admissible = cascade.admissible if restrict else None
    is_original = r == TweetType.ORIGINAL
    prune = 1e-12 / N

    # A candidate's weight is at most peak * exp(-omega_min * lag). Each block
    # first scores the recent candidates; the smallest partial denominator over
    # rows that can have a parent then bounds how far back a candidate can
    # still reach p_jl >= prune, and older columns are skipped.
    peak = float(source.max() * params.omega.max())
    omega_min = float(params.omega.min())
    near_lag = 40.0 / omega_min
    can_have_parent = ~is_original if immigrants == "typed" else np.ones(N, dtype=bool)

    def weights(jj, lo, hi):
        lag = t[jj, None] - t[None, lo:hi]
        valid = lag > 0
        if admissible is not None:
            for i, j in enumerate(jj):
                if admissible[j] is not None:
                    keep = np.zeros(hi - lo, dtype=bool)
                    idx = np.asarray(admissible[j], dtype=np.intp) - lo
                    keep[idx[(idx >= 0) & (idx < hi - lo)]] = True
                    valid[i] &= keep
        om = params.omega[k[jj]][:, None]
        c = _stance_factor(params, k[None, lo:hi], k[jj, None], r[jj, None], retweet_inherits)
        with np.errstate(under="ignore"):
            b = source[None, lo:hi] * c * om * np.exp(-om * np.where(valid, lag, 0.0))
        b[~valid] = 0.0
        b[~can_have_parent[jj]] = 0.0
        return b

    block = 256
    imm = np.empty(N)
    rows, cols, vals = [], [], []
    for start in range(0, N, block):
        jj = np.arange(start, min(N, start + block))
        L = int(n_before[jj[-1]])
        first = min(int(np.searchsorted(t, t[jj[0]] - near_lag, side="left")), L)
        b = weights(jj, first, L)
        if first > 0:
            need = first
            check = can_have_parent[jj]
            if peak > 0 and check.any():
                partial = b.sum(axis=1) + (a[jj] if immigrants == "mixture" else 0.0)
                d_min = float(partial[check].min())
                need = 0
                if d_min > 0:
                    cutoff = math.log(peak / (d_min * prune)) / omega_min
                    if cutoff > 0:
                        need = min(first, int(np.searchsorted(t, t[jj[0]] - cutoff, side="left")))
                    else:
                        need = first
            if need < first:
                b = np.hstack([weights(jj, need, first), b])
                first = need
        aj = a[jj].copy()
        if immigrants == "typed":
            has_parent = b.sum(axis=1) > 0
            aj[~is_original[jj] & has_parent] = 0.0
        denom = aj + b.sum(axis=1)
        bad = ~(denom > 0) | ~np.isfinite(denom)
        if np.any(bad):
            j = int(jj[np.flatnonzero(bad)[0]])
            raise DegenerateParams(
                f"event {cascade[j].id!r} (t={t[j]:.6g}) has zero weight under the current parameters"
            )
        imm[jj] = aj / denom
        p = b / denom[:, None]
        ii, ll = np.nonzero(p > prune)
        rows.append(jj[ii])
        cols.append(ll + first)
        vals.append(p[ii, ll])
    P = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    )
    return Responsibilities(imm, P)


def _pairs(resp: Responsibilities):
    P = resp.ancestors.tocoo()
    return P.row.astype(np.intp), P.col.astype(np.intp), P.data


def excitation_integrals(params: ModelParams, cascade: Cascade, exact: bool = False) -> np.ndarray:
    """(N, K) integrals of each event's excitation of each stance over the future.

    Over ``[t_l, inf)`` by default, which is ``delta * gamma * n``; with
    ``exact=True`` over ``[t_l, T]``.
    """
    w = (params.delta[cascade.types] * cascade.reach)[:, None] * params.gamma[cascade.stances]
    if exact:
        remaining = params.horizon - cascade.times
        w = w * -np.expm1(-np.outer(remaining, params.omega))
    return w


def q_value(
    params: ModelParams,
    resp: Responsibilities,
    cascade: Cascade,
    *,
    retweet_inherits: bool = True,
    exact_compensator: bool = False,
    include_entropy: bool = False,
) -> float:
    """Expected complete-data log-likelihood under ``resp``.

    The immigrant compensator is ``sum_k mu_k T``. With
    ``include_entropy=True`` the entropy of ``resp`` is added, giving the
    Jensen lower bound on the working log-likelihood.
    """
    if len(cascade) == 0:
        return float(-params.mu.sum() * params.horizon)
    t, k, r, n = cascade.times, cascade.stances, cascade.types, cascade.reach
    rows, cols, p = _pairs(resp)
    with np.errstate(divide="ignore"):
        log_a = np.log(_immigrant_weights(params, cascade))
        c = _stance_factor(params, k[cols], k[rows], r[rows], retweet_inherits)
        om = params.omega[k[rows]]
        log_b = (np.log(params.delta[r[cols]]) + np.log(c) + np.log(n[cols]) + np.log(om)
                 - om * (t[rows] - t[cols]))
    pj = resp.immigrant
    q = float(np.dot(pj[pj > 0], log_a[pj > 0])) + float(np.dot(p, log_b))
    q -= params.mu.sum() * params.horizon
    q -= excitation_integrals(params, cascade, exact_compensator).sum()
    if include_entropy:
        q += resp.entropy()
    return q


def working_log_likelihood(
    params: ModelParams,
    cascade: Cascade,
    *,
    retweet_inherits: bool = True,
    immigrants: str = "typed",
    restrict: bool = False,
) -> float:
    """The objective EM ascends: the Jensen bound evaluated at the exact posterior."""
    resp = e_step(params, cascade, retweet_inherits=retweet_inherits,
                  immigrants=immigrants, restrict=restrict)
    return q_value(params, resp, cascade, retweet_inherits=retweet_inherits, include_entropy=True)


def solve_x(resp: Responsibilities, cascade: Cascade, T: float, tol: float = 1e-10) -> float:
    """Scale maximizing ``sum_j p_jj log f(t_j; x, T)``."""
    return truncexp.fit_scale(cascade.times, resp.immigrant, T, tol)


def _solve_decay(A, B, w, remaining, omega0, tol=1e-13, max_iter=1000):
    """Fixed point of the finite-window decay update for one stance."""
    if not A > 0:
        return omega0
    omega = omega0
    for _ in range(max_iter):
        tail = float(np.dot(w, remaining * np.exp(-omega * remaining)))
        new = A / (B + tail)
        if abs(new - omega) <= tol * new:
            return new
        omega = new
    log.warning("finite-window decay update did not settle after %d iterations", max_iter)
    return omega


def m_step(
    resp: Responsibilities,
    cascade: Cascade,
    prev: ModelParams,
    *,
    exact_decay: bool = False,
    x_tol: float = 1e-10,
    flags: list | None = None,
    retweet_inherits: bool = True,
) -> ModelParams:
    """Closed-form parameter updates from responsibilities.

    A parameter family with no supporting mass keeps its previous value and a
    message is appended to ``flags``.
    """
    flags = [] if flags is None else flags
    T = prev.horizon
    t, k, r, n = cascade.times, cascade.stances, cascade.types, cascade.reach
    rows, cols, p = _pairs(resp)

    mu = np.bincount(k, weights=resp.immigrant, minlength=N_STANCES) / T

    try:
        x = solve_x(resp, cascade, T, x_tol)
    except truncexp.ScaleNotIdentified as exc:
        x = prev.x_scale
        flags.append(f"x kept at {x:.6g}: {exc}")

    # stance transfer, counted over every child whose stance is drawn from gamma
    qr = r[rows] != TweetType.RETWEET if retweet_inherits else np.ones(rows.size, dtype=bool)
    transfer = np.zeros((N_STANCES, N_STANCES))
    np.add.at(transfer, (k[cols[qr]], k[rows[qr]]), p[qr])
    gamma = np.array(prev.gamma)
    for row in range(N_STANCES):
        total = transfer[row].sum()
        if total > 0:
            gamma[row] = transfer[row] / total
        else:
            flags.append(f"gamma row {row} kept: no stance-transfer mass attributed")

    offspring = np.bincount(r[cols], weights=p, minlength=N_TYPES)
    if exact_decay:
        window = -np.expm1(-np.outer(T - t, prev.omega))
        exposure = np.bincount(r, weights=n * (gamma[k] * window).sum(axis=1), minlength=N_TYPES)
    else:
        exposure = np.bincount(r, weights=n, minlength=N_TYPES)
    delta = np.array(prev.delta)
    for ty in range(N_TYPES):
        if exposure[ty] > 0:
            delta[ty] = offspring[ty] / exposure[ty]
        elif offspring[ty] > 0 or np.any(r == ty):
            flags.append(f"delta[{TweetType(ty).label}] kept: zero exposure")

    lag = t[rows] - t[cols]
    attributed = np.bincount(k[rows], weights=p, minlength=N_STANCES)
    lag_mass = np.bincount(k[rows], weights=p * lag, minlength=N_STANCES)
    omega = np.array(prev.omega)
    for st in range(N_STANCES):
        if not (attributed[st] > 0 and lag_mass[st] > 0):
            flags.append(f"omega[{st}] kept: no attributed descendants")
            continue
        if exact_decay:
            w = delta[r] * n * gamma[k, st]
            omega[st] = _solve_decay(attributed[st], lag_mass[st], w, T - t, prev.omega[st])
        else:
            omega[st] = attributed[st] / lag_mass[st]

    desc = np.bincount(r[r != TweetType.ORIGINAL], minlength=N_TYPES)[list(DESCENDANT_TYPES)]
    p_type = desc / desc.sum() if desc.sum() > 0 else prev.p_type

    return prev.replace(mu=mu, x_scale=x, delta=delta, gamma=gamma, omega=omega, p_type=p_type)


def param_init(cascade: Cascade, policy: str | ModelParams = "default") -> ModelParams:
    """Starting point for EM.

    The default policy sets each base rate to the stance's original count over
    T (at least one original per stance, so that no stance starts with zero
    background), the scale to the mean original time, every influence factor
    to ``1 / (mean reach * N)``, uniform stance transfer, decay rates to the
    inverse median inter-event gap (1.0 when there are no descendants), and
    empirical descendant type frequencies.
    """
    if isinstance(policy, ModelParams):
        return policy
    if policy != "default":
        raise ValueError(f"unknown init policy {policy!r}")
    if len(cascade) == 0:
        raise ValueError("cannot initialize from an empty cascade")
    T = cascade.horizon
    t, k, r, n = cascade.times, cascade.stances, cascade.types, cascade.reach
    orig = r == TweetType.ORIGINAL
    counts = np.bincount(k[orig], minlength=N_STANCES)
    mu = np.maximum(counts, 1) / T
    x = float(t[orig].mean()) if orig.any() else float(t.mean())
    if not x > 0:
        x = T / 10
    mean_reach = float(n.mean())
    delta = np.full(N_TYPES, 1.0 / (max(mean_reach, 1e-12) * len(cascade)))
    gaps = np.diff(t)
    gaps = gaps[gaps > 0]
    if orig.all() or gaps.size == 0:
        omega = np.ones(N_STANCES)
    else:
        omega = np.full(N_STANCES, 1.0 / float(np.median(gaps)))
    desc = np.bincount(r[~orig], minlength=N_TYPES)[list(DESCENDANT_TYPES)]
    p_type = desc / desc.sum() if desc.sum() > 0 else np.full(3, 1 / 3)
    if abs(p_type.sum() - 1) > 1e-12:
        p_type = p_type / p_type.sum()
    return ModelParams(
        mu=mu, x_scale=x, delta=delta, gamma=np.full((2, 2), 0.5), omega=omega,
        p_type=p_type, horizon=T,
    )


def fit(cascade: Cascade, graph=None, config: EMConfig | None = None) -> FitReport:
    """Run EM from ``config.init`` until the bound changes by at most epsilon.

    ``graph`` is only used to resolve reach when the cascade does not carry it.

    Raises:
        FitAborted: the bound became non-finite.
    """
    config = EMConfig() if config is None else config
    if len(cascade) == 0:
        raise ValueError("cannot fit an empty cascade")
    if not cascade.has_reach:
        if graph is None:
            raise ValueError("cascade has no reach values and no graph was given")
        from .io import resolve_influence

        cascade, _ = resolve_influence(cascade, graph, mode=config.history_mode)
    restrict = config.history_mode == "network"
    if restrict and cascade.admissible is None:
        raise ValueError("network history mode needs admissible sets (resolve with mode='network')")

    opts = dict(retweet_inherits=config.retweet_inherits, immigrants=config.immigrants, restrict=restrict)
    params = param_init(cascade, config.init)
    init = params
    trace, gains, flags = [], [], []
    converged = False
    it = 0

    def report(final_params, converged_, working):
        try:
            ll = log_likelihood(final_params, cascade, retweet_inherits=config.retweet_inherits)
        except ValueError:
            ll = float("nan")
        return FitReport(
            params=final_params, q_trace=trace, loglik=ll, iterations=it, converged=converged_,
            m_step_gains=gains, working_loglik=working, init_params=init, flags=flags,
            config=config.to_dict(),
        )

    for it in range(1, config.max_iters + 1):
        resp = e_step(params, cascade, **opts)
        q_old = q_value(params, resp, cascade, retweet_inherits=config.retweet_inherits)
        step_flags: list[str] = []
        new = m_step(resp, cascade, params, exact_decay=config.exact_decay,
                     x_tol=config.x_solver_tol, flags=step_flags,
                     retweet_inherits=config.retweet_inherits)
        q_new = q_value(new, resp, cascade, retweet_inherits=config.retweet_inherits)
        bound = q_new + resp.entropy()
        for f in step_flags:
            if f not in flags:
                flags.append(f)
        if not math.isfinite(bound):
            raise FitAborted(f"non-finite bound at iteration {it}", report(params, False, float("nan")))
        gains.append(q_new - q_old)
        trace.append(bound)
        params = new
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= config.epsilon:
            converged = True
            break

    try:
        working = working_log_likelihood(params, cascade, **opts)
    except DegenerateParams:
        working = float("nan")
    return report(params, converged, working)


def attribution_summary(resp: Responsibilities, cascade: Cascade) -> dict:
    """Expected number of children attributed to each parent tweet type and stance."""
    rows, cols, p = _pairs(resp)
    k, r = cascade.stances, cascade.types
    by_type = np.bincount(r[cols], weights=p, minlength=N_TYPES)
    by_stance = np.zeros((N_STANCES, N_STANCES))
    np.add.at(by_stance, (k[cols], k[rows]), p)
    return {
        "immigrants": float(resp.immigrant.sum()),
        "children_by_parent_type": {TweetType(i).label: float(v) for i, v in enumerate(by_type)},
        "stance_flow": by_stance.tolist(),
    }


def responsibilities_rows(resp: Responsibilities) -> Sequence[dict[int, float]]:
    """Per-event ``{ancestor index: probability}`` maps, for inspection."""
    P = resp.ancestors
    return [
        dict(zip(P.indices[P.indptr[j]:P.indptr[j + 1]].tolist(), P.data[P.indptr[j]:P.indptr[j + 1]].tolist()))
        for j in range(len(resp))
    ]
