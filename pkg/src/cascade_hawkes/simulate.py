"""Cluster (branching) simulation of marked cascades over a follower graph.

Originals arrive as per-stance Poisson processes with a truncated-exponential
time profile. Every event then spawns a Poisson number of children with mean
``delta[r] * n``. Each child gets a stance from the parent's gamma row, a
tweet type from ``p_type`` (retweets always keep the parent's stance), an
exponential delay with the child stance's decay rate, and an author drawn
from the parent's audience in proportion to audience weight. Generations are
expanded breadth-first until nothing new lands inside the window.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import truncexp
from .model import (
    BETA_FOLLOW,
    BETA_REPLY_VIEW,
    DESCENDANT_TYPES,
    Cascade,
    Event,
    ModelParams,
    Stance,
    TweetType,
)
from .network import FollowerGraph, audience

USER_ASSIGNMENT = ("uniform", "follower-proportional")


class SupercriticalError(RuntimeError):
    """Expected offspring per descendant is at least one."""


@dataclass
class SimConfig:
    params: ModelParams
    graph: FollowerGraph
    seed: int = 0
    max_events: int = 1_000_000
    user_assignment: str = "uniform"
    force: bool = False

    def __post_init__(self):
        if self.max_events <= 0:
            raise ValueError("max_events must be positive")
        if self.user_assignment not in USER_ASSIGNMENT:
            raise ValueError(f"user_assignment must be one of {USER_ASSIGNMENT}")
        if not self.graph.labels:
            raise ValueError("graph has no labelled users to author tweets")


@dataclass
class SimReport:
    cascade: Cascade
    counts: np.ndarray
    truncated: bool
    beyond_horizon: int = 0
    branching_ratio: float = 0.0
    offspring_means: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def counts_table(self) -> dict:
        """Counts keyed by stance label then tweet-type label, plus totals."""
        table = {}
        for k in Stance:
            row = {r.label: int(self.counts[k, r]) for r in TweetType}
            row["total"] = int(self.counts[k].sum())
            table[k.label] = row
        table["total"] = {r.label: int(self.counts[:, r].sum()) for r in TweetType}
        table["total"]["total"] = int(self.counts.sum())
        return table


def offspring_means(params: ModelParams, graph: FollowerGraph) -> np.ndarray:
    """Expected direct children of an event of each tweet type.

    Uses the graph's mean follower count as the typical audience; replies also
    reach the followers of the replied-to author at the lower weight.
    """
    mean_followers = graph.n_edges / max(graph.user_count, 1)
    reach = np.full(len(TweetType), BETA_FOLLOW * mean_followers)
    reach[TweetType.REPLY] += BETA_REPLY_VIEW * mean_followers
    return params.delta * reach


def branching_ratio(params: ModelParams, graph: FollowerGraph, warn: bool = True) -> float:
    """Expected number of descendant children per descendant event.

    This is the spectral radius of the type-to-type mean offspring matrix;
    originals never spawn originals so they do not enter it. The cascade is
    finite almost surely only when it is below one.
    """
    m = offspring_means(params, graph)
    ratio = float(sum(params.p_type[i] * m[r] for i, r in enumerate(DESCENDANT_TYPES)))
    if warn and ratio >= 1:
        warnings.warn(f"supercritical parameters: branching ratio {ratio:.4g} >= 1", RuntimeWarning)
    return ratio


class _IdSource:
    def __init__(self, width: int = 9):
        self._counter = itertools.count()
        self._width = width

    def __call__(self) -> str:
        return f"{next(self._counter):0{self._width}d}"


def _reach(graph: FollowerGraph, author: int, tweet_type: TweetType, parent_author: int | None) -> float:
    return float(audience(graph, author, tweet_type, parent_author)[1].sum())


def sample_immigrants(config: SimConfig, rng: np.random.Generator | None = None,
                      new_id=None) -> list[Event]:
    """Original tweets of both stances, in generation order (not time order)."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    new_id = _IdSource() if new_id is None else new_id
    p, g = config.params, config.graph
    T = p.horizon
    n_users = len(g.labels)
    if config.user_assignment == "uniform":
        user_p = None
    else:
        counts = g.follower_counts().astype(float) + 1.0
        user_p = counts / counts.sum()
    out = []
    for k in Stance:
        count = rng.poisson(p.mu[k] * T)
        times = truncexp.sample(rng, count, p.x_scale, T)
        users = rng.choice(n_users, size=count, p=user_p)
        for t, u in zip(times, users):
            out.append(Event(
                id=new_id(), time=float(t), user=g.labels[u], tweet_type=TweetType.ORIGINAL,
                stance=k, reach=_reach(g, int(u), TweetType.ORIGINAL, None),
            ))
    return out


def sample_offspring(parent: Event, config: SimConfig, rng: np.random.Generator | None = None,
                     parent_author: str | None = None, new_id=None) -> list[Event]:
    """Direct children of ``parent`` that land inside the window.

    ``parent_author`` is the author of the tweet ``parent`` replies to; it only
    matters when ``parent`` is a reply.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    new_id = _IdSource() if new_id is None else new_id
    children, _ = _offspring(parent, config, rng, parent_author, new_id)
    return children


def _offspring(parent, config, rng, parent_author, new_id):
    p, g = config.params, config.graph
    mean = p.delta[parent.tweet_type] * (parent.reach or 0.0)
    count = rng.poisson(mean) if mean > 0 else 0
    if count == 0:
        return [], 0
    author = g.index[parent.user]
    pa = g.index.get(parent_author) if parent_author is not None else None
    users, weights = audience(g, author, parent.tweet_type, pa)
    if users.size == 0:
        return [], 0

    # stance from the gamma row first, then type; retweets keep the parent's stance
    stance = (rng.random(count) >= p.gamma[parent.stance, 0]).astype(int)
    kind = rng.choice(len(DESCENDANT_TYPES), size=count, p=p.p_type)
    kinds = [DESCENDANT_TYPES[i] for i in kind]
    stance = np.where(kind == 0, int(parent.stance), stance)
    delay = rng.exponential(1.0 / p.omega[stance])
    authors = rng.choice(users, size=count, p=weights / weights.sum())

    out, dropped = [], 0
    for k, r, dt, u in zip(stance, kinds, delay, authors):
        t = parent.time + dt
        if t > p.horizon:
            dropped += 1
            continue
        out.append(Event(
            id=new_id(), time=float(t), user=g.labels[u], tweet_type=r, stance=Stance(int(k)),
            parent_id=parent.id, reach=_reach(g, int(u), r, author),
        ))
    return out, dropped


def simulate_cascade(config: SimConfig) -> SimReport:
    """Simulate one cascade; deterministic for a given config and seed."""
    ratio = branching_ratio(config.params, config.graph, warn=config.force)
    if ratio >= 1 and not config.force:
        raise SupercriticalError(
            f"branching ratio {ratio:.4g} >= 1; the cascade would not die out (use force to override)"
        )
    rng = np.random.default_rng(config.seed)
    new_id = _IdSource()
    generation = sample_immigrants(config, rng, new_id)
    events = list(generation[: config.max_events])
    truncated = len(generation) > config.max_events
    author_of = {e.id: e.user for e in events}
    beyond = 0
    while generation and not truncated:
        nxt = []
        for parent in generation:
            pa = author_of.get(parent.parent_id) if parent.parent_id is not None else None
            kids, dropped = _offspring(parent, config, rng, pa, new_id)
            beyond += dropped
            nxt.extend(kids)
        room = config.max_events - len(events)
        if len(nxt) > room:
            nxt = nxt[:room]
            truncated = True
        for e in nxt:
            author_of[e.id] = e.user
        events.extend(nxt)
        generation = nxt
    cascade = Cascade(events, config.params.horizon)
    return SimReport(
        cascade=cascade,
        counts=cascade.counts(),
        truncated=truncated,
        beyond_horizon=beyond,
        branching_ratio=ratio,
        offspring_means=offspring_means(config.params, config.graph),
    )

