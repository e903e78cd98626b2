"""Command-line front end.

Subcommands::

    cascade-hawkes simulate PARAMS [--edges EDGES | --mean-followers F] [--seed S] [--force]
    cascade-hawkes fit EVENTS [EDGES] [--epsilon E] [--max-iters N] [--history {full,network}]
    cascade-hawkes intensity EVENTS PARAMS [--edges EDGES] [--grid N]
    cascade-hawkes residuals EVENTS PARAMS [--edges EDGES]

PARAMS may be a JSON file or the name of a bundled preset. Every run writes
its outputs plus ``<subcommand>.manifest.json`` into ``--out-dir``.

Exit codes: 0 success, 1 fit did not converge, 2 usage error, 3 unreadable
or invalid input, 4 refused (supercritical parameters or too few events).
``CASCADE_HAWKES_THREADS`` caps the threads used by the numeric libraries.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .em import EMConfig, FitAborted, fit
from .intensity import intensity_curves, ks_exponential, rescaled_interarrivals
from .io import (
    PRESETS,
    EventFormatError,
    counts_dict,
    load_params,
    load_preset,
    parse_edges,
    parse_events,
    resolve_influence,
    save_params,
    write_edges,
    write_events,
)
from .model import ModelParams
from .network import generate_network
from .simulate import SimConfig, SupercriticalError, branching_ratio, simulate_cascade

log = logging.getLogger("cascade_hawkes")

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_REFUSED = 4

MIN_RESIDUAL_EVENTS = 10
THREADS_ENV = "CASCADE_HAWKES_THREADS"


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class Refused(Exception):
    pass


@dataclass
class RunManifest:
    """What was run, on what, and what it produced."""

    subcommand: str
    config: dict
    seed: int | None
    inputs: dict[str, str]
    outputs: dict[str, str] = field(default_factory=dict)
    version: str = __version__
    started: float = 0.0
    duration_s: float = 0.0
    exit_code: int = 0

    def write(self, out_dir: Path) -> Path:
        path = out_dir / f"{self.subcommand}.manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")
        return path


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _load_params(spec: str) -> ModelParams:
    try:
        if spec in PRESETS and not os.path.exists(spec):
            return load_preset(spec)
        return load_params(spec)
    except FileNotFoundError:
        raise InputError(f"no such parameter file or preset: {spec}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"invalid parameters in {spec}: {exc}") from None


def _load_events(path: str, horizon: float | None = None):
    try:
        cascade, report = parse_events(path, horizon=horizon)
    except FileNotFoundError:
        raise InputError(f"no such event log: {path}") from None
    except EventFormatError as exc:
        raise InputError(f"{path}: {exc}") from None
    return cascade, report


def _load_edges(path: str | None, user_count: int | None = None):
    if path is None:
        return None
    try:
        return parse_edges(path, user_count)
    except FileNotFoundError:
        raise InputError(f"no such edge list: {path}") from None
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def _cascade_for_params(args, params: ModelParams):
    """Event log on the parameters' window, with reach resolved."""
    cascade, _ = _load_events(args.events, horizon=params.horizon)
    if len(cascade) and cascade.times[-1] > params.horizon:
        raise InputError(f"events extend past the parameter horizon T={params.horizon}")
    graph = _load_edges(args.edges, params.user_count)
    cascade, ingest = resolve_influence(cascade, graph, mode="full")
    if ingest.fallback_events:
        log.warning("%d event(s) have no network data; using reach %.4g",
                    ingest.fallback_events, ingest.fallback_reach)
    return cascade, ingest


def cmd_simulate(args, manifest: RunManifest) -> int:
    params = _load_params(args.params)
    out = args.out_dir
    if args.edges:
        graph = _load_edges(args.edges, params.user_count)
        manifest.inputs["edges"] = args.edges
    else:
        if args.mean_followers is None:
            raise UsageError("simulate needs --edges or --mean-followers")
        try:
            graph = generate_network(params.user_count, args.mean_followers, seed=args.graph_seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        edges_path = out / "edges.csv"
        write_edges(graph, edges_path)
        manifest.outputs["edges"] = str(edges_path)
    ratio = branching_ratio(params, graph, warn=False)
    if ratio >= 1 and not args.force:
        raise Refused(f"branching ratio {ratio:.4g} >= 1: the cascade would not die out; pass --force to run anyway")
    try:
        report = simulate_cascade(SimConfig(params, graph, seed=args.seed, max_events=args.max_events,
                                            force=args.force))
    except SupercriticalError as exc:
        raise Refused(str(exc)) from None
    events_path = out / "events.jsonl"
    write_events(report.cascade, events_path)
    summary = {
        "events": len(report.cascade),
        "counts": report.counts_table(),
        "branching_ratio": report.branching_ratio,
        "offspring_means": dict(zip(("original", "retweet", "quote", "reply"),
                                    map(float, report.offspring_means))),
        "truncated": report.truncated,
        "beyond_horizon": report.beyond_horizon,
    }
    report_path = out / "sim_report.json"
    _write_json(report_path, summary)
    manifest.outputs.update(events=str(events_path), report=str(report_path))
    print(f"simulated {len(report.cascade)} events (branching ratio {report.branching_ratio:.4g})")
    return EXIT_OK


def cmd_fit(args, manifest: RunManifest) -> int:
    cascade, _ = _load_events(args.events, horizon=args.horizon)
    if len(cascade) == 0:
        raise InputError("cannot fit an empty event log")
    graph = _load_edges(args.edges, args.users)
    if args.edges:
        manifest.inputs["edges"] = args.edges
    cascade, ingest = resolve_influence(cascade, graph, mode=args.history)
    config = EMConfig(epsilon=args.epsilon, max_iters=args.max_iters, history_mode=args.history)
    manifest.config["em"] = config.to_dict()
    out = args.out_dir
    try:
        result = fit(cascade, config=config)
    except FitAborted as exc:
        result = exc.report
        result.flags.append(str(exc))
    if args.users is not None:
        result.params = result.params.replace(user_count=args.users)
    elif graph is not None:
        result.params = result.params.replace(user_count=graph.user_count)
    report = result.to_dict()
    report["ingest"] = ingest.to_dict()
    report_path = out / "fit_report.json"
    params_path = out / "params.json"
    _write_json(report_path, report)
    save_params(result.params, params_path)
    manifest.outputs.update(report=str(report_path), params=str(params_path))
    state = "converged" if result.converged else "did not converge"
    print(f"EM {state} after {result.iterations} iteration(s); log-likelihood {result.loglik:.6g}")
    if ingest.fallback_events:
        print(f"note: {ingest.fallback_events} event(s) used fallback reach {ingest.fallback_reach:.4g}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_intensity(args, manifest: RunManifest) -> int:
    if args.grid < 2:
        raise UsageError("--grid must be at least 2")
    params = _load_params(args.params)
    cascade, _ = _cascade_for_params(args, params)
    grid = np.linspace(0.0, params.horizon, args.grid)
    imm, exc = intensity_curves(params, cascade, grid, retweet_inherits=args.kernel == "inherit")
    lam = imm + exc
    path = args.out_dir / "intensity.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "lambda_s", "lambda_n", "lambda"])
        for t, (ls, ln) in zip(grid, lam):
            w.writerow([repr(float(t)), repr(float(ls)), repr(float(ln)), repr(float(ls + ln))])
    manifest.outputs["intensity"] = str(path)
    dominated = int(np.sum(lam[:, 0] > lam[:, 1]))
    print(f"wrote {args.grid} grid points; supporting above not-supporting at {dominated}")
    return EXIT_OK


def cmd_residuals(args, manifest: RunManifest) -> int:
    params = _load_params(args.params)
    cascade, _ = _cascade_for_params(args, params)
    if len(cascade) == 0:
        raise UsageError("event log is empty")
    if len(cascade) < MIN_RESIDUAL_EVENTS:
        raise Refused(f"{len(cascade)} events is too few for a meaningful KS test (need {MIN_RESIDUAL_EVENTS})")
    res = rescaled_interarrivals(params, cascade, retweet_inherits=args.kernel == "inherit")
    ks = ks_exponential(res)
    csv_path = args.out_dir / "residuals.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "t", "residual"])
        for e, r in zip(cascade, res):
            w.writerow([e.id, repr(e.time), repr(float(r))])
    ks_path = args.out_dir / "ks.json"
    _write_json(ks_path, {"statistic": ks.statistic, "pvalue": ks.pvalue, "n": ks.n,
                          "kernel": args.kernel, "counts": counts_dict(cascade.counts())})
    manifest.outputs.update(residuals=str(csv_path), ks=str(ks_path))
    print(f"KS distance {ks.statistic:.4g}, p-value {ks.pvalue:.4g} over {ks.n} residuals")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", type=Path, default=Path("."), help="directory for outputs (created if missing)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cascade-hawkes", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a cascade")
    p.add_argument("params", help="parameter JSON file or preset name")
    p.add_argument("--edges", help="follower edge list (follower,followee)")
    p.add_argument("--mean-followers", type=float, help="generate a random graph with this mean follower count")
    p.add_argument("--graph-seed", type=int, default=0, help="seed for the generated graph")
    p.add_argument("--max-events", type=int, default=1_000_000)
    p.add_argument("--force", action="store_true", help="simulate even when supercritical")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="estimate parameters with EM")
    p.add_argument("events", help="event log (JSON lines)")
    p.add_argument("edges", nargs="?", help="follower edge list; without it reach falls back to the log or a default")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--history", choices=("full", "network"), default="full")
    p.add_argument("--horizon", type=float, help="observation window length (default: last event time)")
    p.add_argument("--users", type=int, help="size of the user universe")
    p.set_defaults(func=cmd_fit)

    for name, func, helptext in (("intensity", cmd_intensity, "intensity curves on a grid"),
                                 ("residuals", cmd_residuals, "time-rescaled residuals and KS test")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("events", help="event log (JSON lines)")
        p.add_argument("params", help="parameter JSON file or preset name")
        p.add_argument("--edges", help="follower edge list, used when the log has no reach values")
        p.add_argument("--kernel", choices=("gamma", "inherit"), default="gamma",
                       help="stance mixing of the excitation kernel (default: gamma)")
        if name == "intensity":
            p.add_argument("--grid", type=int, default=200, help="number of grid points over [0, T]")
        p.set_defaults(func=func)
    return parser


def _validate(args) -> None:
    if getattr(args, "epsilon", 1.0) <= 0:
        raise UsageError("--epsilon must be positive")
    if getattr(args, "max_iters", 1) < 1:
        raise UsageError("--max-iters must be at least 1")
    if getattr(args, "max_events", 1) < 1:
        raise UsageError("--max-events must be at least 1")
    if getattr(args, "mean_followers", None) is not None and args.mean_followers < 0:
        raise UsageError("--mean-followers must be non-negative")


def _threads() -> int | None:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    config = {k: (str(v) if isinstance(v, Path) else v)
              for k, v in vars(args).items() if k not in ("func", "verbose")}
    inputs = {k: str(config[k]) for k in ("params", "events", "edges") if config.get(k)}
    manifest = RunManifest(subcommand=args.command, config=config, seed=args.seed, inputs=inputs,
                           started=time.time())
    t0 = time.perf_counter()
    try:
        _validate(args)
        threads = _threads()
        args.out_dir.mkdir(parents=True, exist_ok=True)
        with threadpool_limits(limits=threads):
            code = args.func(args, manifest)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    except Refused as exc:
        print(f"refused: {exc}", file=sys.stderr)
        code = EXIT_REFUSED
    manifest.duration_s = time.perf_counter() - t0
    manifest.exit_code = code
    manifest.write(args.out_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
