"""Domain types for stance- and tweet-type-marked cascades.

Times are hours, rates are per hour. Stances and tweet types are small integer
enums so they can index parameter arrays directly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

BETA_FOLLOW = 0.95
BETA_REPLY_VIEW = 0.05


class TweetType(enum.IntEnum):
    ORIGINAL = 0
    RETWEET = 1
    QUOTE = 2
    REPLY = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "TweetType":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown tweet type {label!r}") from None


class Stance(enum.IntEnum):
    SUPPORTING = 0
    NOT_SUPPORTING = 1

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Stance":
        try:
            return cls[label.strip().upper().replace("-", "_")]
        except KeyError:
            raise ValueError(f"unknown stance {label!r}") from None


DESCENDANT_TYPES = (TweetType.RETWEET, TweetType.QUOTE, TweetType.REPLY)
N_STANCES = len(Stance)
N_TYPES = len(TweetType)


@dataclass(frozen=True)
class Event:
    """One tweet.

    ``reach`` is the cached audience mass n_j; ``None`` until resolved against
    a follower graph.
    """

    id: str
    time: float
    user: str
    tweet_type: TweetType
    stance: Stance
    parent_id: str | None = None
    reach: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.time) or self.time < 0:
            raise ValueError(f"event {self.id!r}: time must be finite and >= 0, got {self.time}")
        if self.reach is not None and not (self.reach >= 0 and math.isfinite(self.reach)):
            raise ValueError(f"event {self.id!r}: reach must be finite and >= 0")
        object.__setattr__(self, "tweet_type", TweetType(self.tweet_type))
        object.__setattr__(self, "stance", Stance(self.stance))


class Cascade:
    """Time-ordered event log observed on ``[0, horizon]``.

    Events are sorted by ``(time, id)``. ``admissible`` optionally restricts,
    per event, which earlier events may have triggered it (indices into the
    sorted event list); ``None`` for an entry means every earlier event.
    """

    def __init__(
        self,
        events: Iterable[Event],
        horizon: float,
        admissible: Sequence[Sequence[int] | None] | None = None,
    ):
        events = sorted(events, key=lambda e: (e.time, e.id))
        if not horizon > 0 or not math.isfinite(horizon):
            raise ValueError(f"horizon must be a positive finite number, got {horizon}")
        ids = [e.id for e in events]
        if len(set(ids)) != len(ids):
            raise ValueError("event ids must be unique")
        if events and events[-1].time > horizon:
            raise ValueError(
                f"event {events[-1].id!r} at t={events[-1].time} lies beyond horizon {horizon}"
            )
        if admissible is not None and len(admissible) != len(events):
            raise ValueError("admissible must have one entry per event")
        self.events: tuple[Event, ...] = tuple(events)
        self.horizon = float(horizon)
        self.admissible = None if admissible is None else tuple(
            None if a is None else tuple(int(i) for i in a) for a in admissible
        )
        self._position = {e.id: i for i, e in enumerate(self.events)}

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, i: int) -> Event:
        return self.events[i]

    def __repr__(self) -> str:
        return f"Cascade(n_events={len(self)}, horizon={self.horizon})"

    def position(self, event_id: str) -> int | None:
        return self._position.get(event_id)

    @property
    def times(self) -> np.ndarray:
        return np.array([e.time for e in self.events], dtype=float)

    @property
    def stances(self) -> np.ndarray:
        return np.array([int(e.stance) for e in self.events], dtype=np.intp)

    @property
    def types(self) -> np.ndarray:
        return np.array([int(e.tweet_type) for e in self.events], dtype=np.intp)

    @property
    def has_reach(self) -> bool:
        return all(e.reach is not None for e in self.events)

    @property
    def reach(self) -> np.ndarray:
        if not self.has_reach:
            missing = next(e.id for e in self.events if e.reach is None)
            raise ValueError(f"reach not resolved for event {missing!r}; run resolve_influence first")
        return np.array([e.reach for e in self.events], dtype=float)

    @property
    def parent_index(self) -> np.ndarray:
        """Position of each event's parent in this cascade, -1 when unresolved."""
        out = np.full(len(self), -1, dtype=np.intp)
        for i, e in enumerate(self.events):
            if e.parent_id is not None:
                p = self._position.get(e.parent_id)
                if p is not None:
                    out[i] = p
        return out

    def counts(self) -> np.ndarray:
        """Event counts as a (stance x tweet type) table."""
        table = np.zeros((N_STANCES, N_TYPES), dtype=np.int64)
        for e in self.events:
            table[e.stance, e.tweet_type] += 1
        return table

    def replace_events(self, events: Iterable[Event], *, keep_admissible: bool = True) -> "Cascade":
        return Cascade(events, self.horizon, self.admissible if keep_admissible else None)

    def with_horizon(self, horizon: float) -> "Cascade":
        return Cascade(self.events, horizon, self.admissible)

    def with_reach(self, reach: Sequence[float]) -> "Cascade":
        reach = list(reach)
        if len(reach) != len(self):
            raise ValueError("need one reach value per event")
        return Cascade(
            [replace(e, reach=float(n)) for e, n in zip(self.events, reach)],
            self.horizon,
            self.admissible,
        )

    def with_admissible(self, admissible: Sequence[Sequence[int] | None] | None) -> "Cascade":
        return Cascade(self.events, self.horizon, admissible)


def _as_array(value, shape, name) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of the marked Hawkes model.

    Attributes:
        mu: Base immigrant rate per stance (supporting, not-supporting).
        x_scale: Scale of the truncated-exponential arrival profile of originals.
        delta: Influence per unit reach for each parent tweet type
            (original, retweet, quote, reply).
        gamma: Row-stochastic stance transfer matrix; ``gamma[k_parent, k_child]``.
        omega: Exponential kernel decay rate per child stance.
        p_type: Descendant type distribution (retweet, quote, reply).
        horizon: Observation window length T.
        user_count: Size U of the user universe, informational.
    """

    mu: np.ndarray
    x_scale: float
    delta: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    p_type: np.ndarray
    horizon: float
    user_count: int | None = None
    beta_follow: float = field(default=BETA_FOLLOW)
    beta_reply_view: float = field(default=BETA_REPLY_VIEW)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("mu", _as_array(self.mu, (N_STANCES,), "mu"))
        set_("delta", _as_array(self.delta, (N_TYPES,), "delta"))
        set_("gamma", _as_array(self.gamma, (N_STANCES, N_STANCES), "gamma"))
        set_("omega", _as_array(self.omega, (N_STANCES,), "omega"))
        set_("p_type", _as_array(self.p_type, (len(DESCENDANT_TYPES),), "p_type"))
        set_("x_scale", float(self.x_scale))
        set_("horizon", float(self.horizon))
        self.validate()

    def validate(self) -> None:
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be positive")
        if not (self.x_scale > 0 and math.isfinite(self.x_scale)):
            raise ValueError("x_scale must be positive")
        for name in ("mu", "delta"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} must be finite and nonnegative")
        if not np.all(np.isfinite(self.omega)) or np.any(self.omega <= 0):
            raise ValueError("omega must be positive")
        if np.any(self.gamma < 0) or np.any(np.abs(self.gamma.sum(axis=1) - 1) > 1e-12):
            raise ValueError("gamma rows must be nonnegative and sum to 1")
        if np.any(self.p_type < 0) or abs(self.p_type.sum() - 1) > 1e-12:
            raise ValueError("p_type must be a probability vector over (retweet, quote, reply)")

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    # flat JSON layout, keys named after the parameter table
    _STANCE_KEYS = ("s", "n")
    _TYPE_KEYS = ("ori", "ret", "quo", "rply")

    def to_dict(self) -> dict:
        s, n = self._STANCE_KEYS
        out = {
            "mu_s": float(self.mu[0]),
            "mu_n": float(self.mu[1]),
            "x": self.x_scale,
        }
        for i, key in enumerate(self._TYPE_KEYS):
            out[f"delta_{key}"] = float(self.delta[i])
        for a, ka in enumerate(self._STANCE_KEYS):
            for b, kb in enumerate(self._STANCE_KEYS):
                out[f"gamma_{ka}{kb}"] = float(self.gamma[a, b])
        out["omega_s"] = float(self.omega[0])
        out["omega_n"] = float(self.omega[1])
        for i, key in enumerate(self._TYPE_KEYS[1:]):
            out[f"p_{key}"] = float(self.p_type[i])
        out["T"] = self.horizon
        out["U"] = self.user_count
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        missing = [k for k in PARAM_KEYS if k not in d and k != "U"]
        if missing:
            raise KeyError(f"params missing keys: {', '.join(missing)}")
        keys = cls._STANCE_KEYS
        gamma = [[d[f"gamma_{a}{b}"] for b in keys] for a in keys]
        p_type = [d["p_ret"], d["p_quo"], d["p_rply"]]
        u = d.get("U")
        return cls(
            mu=[d["mu_s"], d["mu_n"]],
            x_scale=d["x"],
            delta=[d[f"delta_{k}"] for k in cls._TYPE_KEYS],
            gamma=gamma,
            omega=[d["omega_s"], d["omega_n"]],
            p_type=p_type,
            horizon=d["T"],
            user_count=None if u is None else int(u),
        )

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f.name), getattr(other, f.name)) for f in fields(self)
        )

    __hash__ = None


PARAM_KEYS = (
    "mu_s", "mu_n", "x",
    "delta_ori", "delta_ret", "delta_quo", "delta_rply",
    "gamma_ss", "gamma_sn", "gamma_ns", "gamma_nn",
    "omega_s", "omega_n",
    "p_ret", "p_quo", "p_rply",
    "T", "U",
)


def normalize_rows(m) -> np.ndarray:
    """Return ``m`` with each row rescaled to sum to exactly one (up to rounding)."""
    m = np.asarray(m, dtype=float)
    return m / m.sum(axis=1, keepdims=True)
