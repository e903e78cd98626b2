"""Reading and writing event logs, follower edge lists and parameter files.

Event log: JSON lines with keys ``id``, ``t`` (hours), ``user``, ``type``
(original/retweet/quote/reply), ``stance`` (supporting/not_supporting),
``parent`` (id or null) and an optional ``reach`` (total audience weight, as
written by the simulator).

Edge list: CSV rows ``follower,followee``; an optional ``follower,followee``
header and an optional ``# users: N`` comment giving the size of the user
universe.
"""

from __future__ import annotations

import csv
import io as _io
import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import IO, Iterator

import numpy as np

from .model import N_STANCES, N_TYPES, Cascade, Event, ModelParams, Stance, TweetType
from .network import FollowerGraph, event_reach

log = logging.getLogger(__name__)

PathOrStream = str | os.PathLike | IO[str]

PRESETS = {
    "recovery_truth": "recovery_truth.json",
    "vaccine_story_fit": "vaccine_story_fit.json",
}


class EventFormatError(ValueError):
    """Malformed or inconsistent event log."""


@dataclass
class IngestReport:
    events: int = 0
    users_without_network: list[str] = field(default_factory=list)
    fallback_events: int = 0
    fallback_reach: float | None = None
    unresolved_parents: int = 0
    assumption_violations: list[str] = field(default_factory=list)
    corrected: int = 0
    counts: np.ndarray = field(default_factory=lambda: np.zeros((N_STANCES, N_TYPES), dtype=np.int64))

    def to_dict(self) -> dict:
        return {
            "events": self.events,
            "users_without_network": len(self.users_without_network),
            "fallback_events": self.fallback_events,
            "fallback_reach": self.fallback_reach,
            "unresolved_parents": self.unresolved_parents,
            "assumption_violations": len(self.assumption_violations),
            "corrected": self.corrected,
            "counts": counts_dict(self.counts),
        }


def counts_dict(counts: np.ndarray) -> dict:
    return {k.label: {r.label: int(counts[k, r]) for r in TweetType} for k in Stance}


@contextmanager
def _open(source: PathOrStream, mode: str = "r") -> Iterator[IO[str]]:
    if hasattr(source, "read") or hasattr(source, "write"):
        yield source
    else:
        with open(source, mode, encoding="utf-8", newline="") as fh:
            yield fh


def _parse_record(line: str, lineno: int) -> Event:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise EventFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(rec, dict):
        raise EventFormatError(f"line {lineno}: expected a JSON object")
    try:
        parent = rec.get("parent")
        t = rec["t"]
        if isinstance(t, bool) or not isinstance(t, (int, float)):
            raise TypeError("t must be a number")
        reach = rec.get("reach")
        if reach is not None and (isinstance(reach, bool) or not isinstance(reach, (int, float))):
            raise TypeError("reach must be a number")
        return Event(
            id=str(rec["id"]),
            time=float(t),
            user=str(rec["user"]),
            tweet_type=TweetType.from_label(rec["type"]),
            stance=Stance.from_label(rec["stance"]),
            parent_id=None if parent is None else str(parent),
            reach=None if reach is None else float(reach),
        )
    except KeyError as exc:
        raise EventFormatError(f"line {lineno}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError, AttributeError) as exc:
        raise EventFormatError(f"line {lineno}: {exc}") from None


def parse_events(source: PathOrStream, horizon: float | None = None) -> tuple[Cascade, IngestReport]:
    """Load an event log.

    The horizon defaults to the last event time; it must be given for an empty
    log.

    Raises:
        EventFormatError: malformed line (with its line number), duplicate id,
            a parent that is not strictly earlier than its child, or an event
            beyond the given horizon.
    """
    events, seen = [], {}
    with _open(source) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            e = _parse_record(line, lineno)
            if e.id in seen:
                raise EventFormatError(f"line {lineno}: duplicate id {e.id!r} (first on line {seen[e.id]})")
            seen[e.id] = lineno
            events.append(e)
    by_id = {e.id: e for e in events}
    for e in events:
        parent = by_id.get(e.parent_id) if e.parent_id is not None else None
        if parent is not None and not parent.time < e.time:
            raise EventFormatError(
                f"line {seen[e.id]}: parent {parent.id!r} at t={parent.time} is not earlier than child at t={e.time}"
            )
    if horizon is None:
        if not events:
            raise EventFormatError("empty event log: a horizon must be given")
        horizon = max(e.time for e in events)
    try:
        cascade = Cascade(events, horizon)
    except ValueError as exc:
        raise EventFormatError(str(exc)) from None
    report = IngestReport(events=len(cascade), counts=cascade.counts())
    report.unresolved_parents = sum(
        1 for e in cascade if e.parent_id is not None and e.parent_id not in by_id
    )
    return cascade, report


def event_record(e: Event) -> dict:
    rec = {
        "id": e.id,
        "t": e.time,
        "user": e.user,
        "type": e.tweet_type.label,
        "stance": e.stance.label,
        "parent": e.parent_id,
    }
    if e.reach is not None:
        rec["reach"] = e.reach
    return rec


def write_events(cascade: Cascade, dest: PathOrStream) -> None:
    """Write the canonical JSON-lines form (time order, fixed key order, LF)."""
    with _open(dest, "w") as fh:
        for e in cascade:
            fh.write(json.dumps(event_record(e), ensure_ascii=False) + "\n")


def events_text(cascade: Cascade) -> str:
    buf = _io.StringIO()
    write_events(cascade, buf)
    return buf.getvalue()


def parse_edges(source: PathOrStream, user_count: int | None = None) -> FollowerGraph:
    """Load a follower edge list; duplicates collapse and self-loops are dropped."""
    edges = []
    declared = None
    first_row = True
    with _open(source) as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or not any(cell.strip() for cell in row):
                continue
            if row[0].lstrip().startswith("#"):
                text = ",".join(row).lstrip("# ").strip()
                if text.lower().startswith("users:"):
                    declared = int(text.split(":", 1)[1])
                continue
            if len(row) != 2:
                raise ValueError(f"edge list line {lineno}: expected 'follower,followee'")
            a, b = row[0].strip(), row[1].strip()
            if first_row and (a.lower(), b.lower()) == ("follower", "followee"):
                first_row = False
                continue
            first_row = False
            edges.append((a, b))
    return FollowerGraph.from_edges(edges, user_count if user_count is not None else declared)


def write_edges(graph: FollowerGraph, dest: PathOrStream) -> None:
    follower, followee = graph.edge_arrays()
    with _open(dest, "w") as fh:
        if graph.user_count != len(graph.labels):
            fh.write(f"# users: {graph.user_count}\n")
        fh.write("follower,followee\n")
        labels = np.asarray(graph.labels, dtype=object)
        chunk = 1_000_000
        for s in range(0, follower.size, chunk):
            a = labels[follower[s:s + chunk]]
            b = labels[followee[s:s + chunk]]
            fh.write("".join(f"{x},{y}\n" for x, y in zip(a, b)))


def resolve_influence(
    cascade: Cascade,
    graph: FollowerGraph | None,
    mode: str = "full",
    fallback_reach: float | None = None,
) -> tuple[Cascade, IngestReport]:
    """Attach reach to every event and, in ``"network"`` mode, candidate parents.

    Without a graph, reach values recorded in the log are kept. Authors
    missing from the graph (or events without a recorded reach when there is
    no graph) get the median reach of the resolved events (or
    ``fallback_reach`` when given; 1.0 when nothing is resolved). In network mode an event whose parent is in the cascade may only
    have been triggered by that parent or its ancestors; any other event may
    have been triggered by anything earlier.
    """
    if mode not in ("full", "network"):
        raise ValueError("mode must be 'full' or 'network'")
    report = IngestReport(events=len(cascade), counts=cascade.counts())
    parent_idx = cascade.parent_index
    reach = np.full(len(cascade), np.nan)
    missing_users: set[str] = set()
    for j, e in enumerate(cascade):
        if graph is None and e.reach is not None:
            reach[j] = e.reach
            continue
        if graph is None or e.user not in graph:
            missing_users.add(e.user)
            continue
        pa = None
        if e.tweet_type == TweetType.REPLY and parent_idx[j] >= 0:
            candidate = cascade[parent_idx[j]].user
            pa = candidate if candidate in graph else None
        reach[j] = event_reach(graph, e, pa)
    unknown = np.isnan(reach)
    if fallback_reach is None:
        fallback_reach = float(np.median(reach[~unknown])) if (~unknown).any() else 1.0
    reach[unknown] = fallback_reach
    report.users_without_network = sorted(missing_users)
    report.fallback_events = int(unknown.sum())
    report.fallback_reach = float(fallback_reach) if unknown.any() else None
    report.unresolved_parents = sum(
        1 for j, e in enumerate(cascade) if e.parent_id is not None and parent_idx[j] < 0
    )
    out = cascade.with_reach(reach)
    if mode == "network":
        admissible = []
        for j in range(len(cascade)):
            chain = []
            p = parent_idx[j]
            while p >= 0 and len(chain) <= len(cascade):
                chain.append(int(p))
                p = parent_idx[p]
            admissible.append(chain or None)
        out = out.with_admissible(admissible)
    if report.fallback_events:
        log.info("%d event(s) from %d user(s) without network data use reach %.4g",
                 report.fallback_events, len(missing_users), fallback_reach)
    return out, report


def validate_assumptions(cascade: Cascade, correct: bool = False) -> tuple[Cascade, IngestReport]:
    """Check that retweets carry their parent's stance.

    Retweets whose parent is not in the cascade cannot be checked and are
    skipped. With ``correct=True`` offending retweets take the parent's stance
    (parents are fixed first, so chains of retweets are corrected in order).
    """
    report = IngestReport(events=len(cascade))
    parent_idx = cascade.parent_index
    events = list(cascade.events)
    for j, e in enumerate(events):
        p = parent_idx[j]
        if e.tweet_type != TweetType.RETWEET or p < 0:
            continue
        parent = events[p]
        if e.stance != parent.stance:
            report.assumption_violations.append(
                f"retweet {e.id!r} has stance {e.stance.label} but parent {parent.id!r} is {parent.stance.label}"
            )
            if correct:
                events[j] = replace(e, stance=parent.stance)
                report.corrected += 1
    out = cascade.replace_events(events) if correct and report.corrected else cascade
    report.counts = out.counts()
    if report.assumption_violations and not correct:
        log.warning("%d retweet(s) disagree with their parent's stance", len(report.assumption_violations))
    return out, report


def load_params(source: PathOrStream) -> ModelParams:
    with _open(source) as fh:
        return ModelParams.from_dict(json.load(fh))


def save_params(params: ModelParams, dest: PathOrStream) -> None:
    with _open(dest, "w") as fh:
        json.dump(params.to_dict(), fh, indent=2)
        fh.write("\n")


def load_preset(name: str) -> ModelParams:
    """Bundled parameter sets: ``recovery_truth`` and ``vaccine_story_fit``."""
    try:
        fname = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    text = resources.files("cascade_hawkes.data").joinpath(fname).read_text(encoding="utf-8")
    return ModelParams.from_dict(json.loads(text))
