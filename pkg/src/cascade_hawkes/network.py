"""Follower graphs, audience weights and event reach."""

from __future__ import annotations

import logging
from typing import Iterable, Sequence

import numpy as np

from .model import BETA_FOLLOW, BETA_REPLY_VIEW, Event, TweetType

log = logging.getLogger(__name__)


class UnknownUserError(KeyError):
    """A user id has no entry in the follower graph."""


class FollowerGraph:
    """Directed follow relation stored as a followee -> followers CSR index.

    Users are addressed by string labels. ``user_count`` may exceed the number
    of labelled users; the extra users have no network data.
    """

    def __init__(
        self,
        labels: Sequence[str],
        follower: np.ndarray,
        followee: np.ndarray,
        user_count: int | None = None,
        dropped_self_loops: int = 0,
    ):
        self.labels = tuple(str(u) for u in labels)
        self.index = {u: i for i, u in enumerate(self.labels)}
        if len(self.index) != len(self.labels):
            raise ValueError("user labels must be unique")
        n = len(self.labels)
        follower = np.asarray(follower, dtype=np.int64)
        followee = np.asarray(followee, dtype=np.int64)
        if follower.shape != followee.shape:
            raise ValueError("follower and followee arrays must align")
        if np.any(follower == followee):
            raise ValueError("self-loops are not allowed")
        if follower.size and (min(follower.min(), followee.min()) < 0 or max(follower.max(), followee.max()) >= n):
            raise ValueError("edge endpoint out of range")
        key = np.unique(followee * max(n, 1) + follower)
        followee, follower = np.divmod(key, max(n, 1))
        self._ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(followee, minlength=n), out=self._ptr[1:])
        self._followers = follower.astype(np.int32)
        self.user_count = n if user_count is None else int(user_count)
        if self.user_count < n:
            raise ValueError(f"user_count {self.user_count} below the {n} labelled users")
        self.dropped_self_loops = int(dropped_self_loops)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]], user_count: int | None = None,
                   users: Iterable[str] = ()) -> "FollowerGraph":
        """Build from ``(follower, followee)`` label pairs; self-loops are dropped."""
        index: dict[str, int] = {}
        for u in users:
            index.setdefault(str(u), len(index))
        src, dst, loops = [], [], 0
        for a, b in edges:
            a, b = str(a), str(b)
            if a == b:
                loops += 1
                continue
            src.append(index.setdefault(a, len(index)))
            dst.append(index.setdefault(b, len(index)))
        if loops:
            log.warning("dropped %d self-loop edge(s)", loops)
        return cls(list(index), np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                   user_count, dropped_self_loops=loops)

    def __repr__(self) -> str:
        return f"FollowerGraph(users={self.user_count}, labelled={len(self.labels)}, edges={self.n_edges})"

    @property
    def n_edges(self) -> int:
        return int(self._followers.size)

    def __contains__(self, user: str) -> bool:
        return user in self.index

    def _idx(self, user: str) -> int:
        try:
            return self.index[user]
        except KeyError:
            raise UnknownUserError(user) from None

    def followers_of(self, user: str | int) -> np.ndarray:
        """Follower indices of ``user`` (a label or an index), sorted ascending."""
        i = user if isinstance(user, (int, np.integer)) else self._idx(user)
        return self._followers[self._ptr[i]:self._ptr[i + 1]]

    def follower_counts(self) -> np.ndarray:
        return np.diff(self._ptr)

    def follows(self, follower: str, followee: str) -> bool:
        f = self._idx(follower)
        lst = self.followers_of(followee)
        pos = np.searchsorted(lst, f)
        return bool(pos < lst.size and lst[pos] == f)

    def edges(self) -> set[tuple[str, str]]:
        out = set()
        for j, u in enumerate(self.labels):
            for i in self.followers_of(j):
                out.add((self.labels[i], u))
        return out

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(follower, followee) index arrays, sorted by followee then follower."""
        followee = np.repeat(np.arange(len(self.labels)), np.diff(self._ptr))
        return self._followers.astype(np.int64), followee


def reach_weight(graph: FollowerGraph, observer: str, event: Event,
                 parent_author: str | None = None) -> float:
    """Audience weight of ``observer`` for ``event``.

    0.95 for a follower of the event's author; for replies, 0.05 for a user who
    follows the author of the tweet being replied to; 0 otherwise. The author
    is never part of their own audience.
    """
    graph._idx(observer)
    graph._idx(event.user)
    if observer == event.user:
        return 0.0
    if graph.follows(observer, event.user):
        return BETA_FOLLOW
    if event.tweet_type == TweetType.REPLY and parent_author is not None:
        if graph.follows(observer, parent_author):
            return BETA_REPLY_VIEW
    return 0.0


def audience(graph: FollowerGraph, author: str | int, tweet_type: TweetType,
             parent_author: str | int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """User indices with nonzero audience weight for a tweet, and their weights."""
    a = author if isinstance(author, (int, np.integer)) else graph._idx(author)
    primary = graph.followers_of(a)
    if tweet_type != TweetType.REPLY or parent_author is None:
        return primary, np.full(primary.size, BETA_FOLLOW)
    p = parent_author if isinstance(parent_author, (int, np.integer)) else graph._idx(parent_author)
    viewers = graph.followers_of(p)
    viewers = viewers[~np.isin(viewers, primary, assume_unique=True) & (viewers != a)]
    users = np.concatenate([primary, viewers])
    weights = np.concatenate([np.full(primary.size, BETA_FOLLOW), np.full(viewers.size, BETA_REPLY_VIEW)])
    return users, weights


def event_reach(graph: FollowerGraph, event: Event, parent_author: str | None = None) -> float:
    """Total audience weight n_j of an event (sum of ``reach_weight`` over users)."""
    _, w = audience(graph, event.user, event.tweet_type, parent_author)
    return float(w.sum())


def generate_network(user_count: int, mean_followers: float, seed: int | None = None,
                     exponent: float = 2.5, max_rounds: int = 50) -> FollowerGraph:
    """Random follower graph with heavy-tailed follower counts.

    Each user gets a popularity weight drawn from a Pareto law with tail
    ``exponent``; edges pick their followee in proportion to popularity and
    their follower uniformly. Duplicate edges and self-loops are rejected and
    redrawn until the mean follower count reaches ``mean_followers`` (or the
    round budget runs out). Users are labelled ``"0" .. str(user_count - 1)``.
    """
    if user_count < 1:
        raise ValueError("user_count must be >= 1")
    if mean_followers < 0:
        raise ValueError("mean_followers must be >= 0")
    if user_count > 1 and mean_followers >= user_count - 1:
        raise ValueError("mean_followers must be below user_count - 1")
    if user_count == 1 and mean_followers > 0:
        log.info("single-user graph has no edges")
    if exponent <= 1:
        raise ValueError("exponent must exceed 1")
    labels = [str(i) for i in range(user_count)]
    if user_count == 1:
        return FollowerGraph(labels, np.empty(0, np.int64), np.empty(0, np.int64))

    rng = np.random.default_rng(seed)
    n = user_count
    weight = (1.0 - rng.random(n)) ** (-1.0 / (exponent - 1.0))
    prob = weight / weight.sum()
    target = int(round(mean_followers * n))
    keys = np.empty(0, dtype=np.int64)
    for _ in range(max_rounds):
        need = target - keys.size
        if need <= 0:
            break
        draw = int(need * 1.1) + 16
        followee = rng.choice(n, size=draw, p=prob)
        follower = rng.integers(0, n, size=draw)
        ok = follower != followee
        fresh = followee[ok] * n + follower[ok]
        # keep first occurrences in draw order so the result is seed-deterministic
        _, first = np.unique(fresh, return_index=True)
        fresh = fresh[np.sort(first)]
        fresh = fresh[~np.isin(fresh, keys)][:need]
        keys = np.concatenate([keys, fresh])
    followee, follower = np.divmod(keys, n)
    return FollowerGraph(labels, follower, followee)
