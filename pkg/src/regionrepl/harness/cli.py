"""Command line entry point: ``regionrepl run|check|converge|gen``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checks import check_convergence, verify_trace
from .runner import run_scenario
from .scenario import ScenarioError, dump_scenario, load_scenario, random_scenario
from .trace import TraceFormatError


def _write(path: str | None, text: str) -> None:
    if path is None:
        return
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    outcome = run_scenario(scenario, args.seed, args.trace_heartbeats, args.max_time)
    _write(args.trace, outcome.trace_text)
    _write(args.metrics, outcome.metrics_json())
    summary = outcome.metrics["summary"]
    print(f"{scenario.name}: {outcome.result.reason} at t={outcome.result.end_time} ms, "
          f"{summary['acked']}/{summary['writes']} writes acked", file=sys.stderr)
    rc = 0
    if outcome.result.timed_out:
        print("FAIL simulation hit max_time with traffic pending", file=sys.stderr)
        rc = 1
    if args.check:
        report = verify_trace(outcome.trace_text)
        for line in report.lines():
            print(line, file=sys.stderr)
        rc = rc or (0 if report.ok else 1)
    return rc


def cmd_check(args) -> int:
    text = sys.stdin.read() if args.trace == "-" else Path(args.trace).read_text()
    report = verify_trace(text)
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def cmd_converge(args) -> int:
    scenario = load_scenario(args.scenario)
    outcome = run_scenario(scenario, args.seed, max_time_ms=args.max_time)
    report = check_convergence(outcome.world)
    print(report)
    if outcome.result.timed_out:
        print(f"FAIL simulation stopped by max_time at t={outcome.result.end_time} ms")
        return 1
    return 0 if report.ok else 1


def cmd_gen(args) -> int:
    roles = tuple(args.entry.split(","))
    s = random_scenario(args.seed, args.writes, reads=args.reads, entry_roles=roles,
                        span_ms=args.span, jitter_ms=args.jitter)
    _write(args.out, dump_scenario(s))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regionrepl",
                                description="Region replication simulator and checkers.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario, write trace and metrics")
    r.add_argument("--scenario", required=True, help="scenario file or bundled name")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--trace", default=None, help="trace output path ('-' for stdout)")
    r.add_argument("--metrics", default=None, help="metrics JSON output path")
    r.add_argument("--max-time", type=int, default=None, help="override max_time_ms")
    r.add_argument("--trace-heartbeats", action="store_true",
                   help="include heartbeat traffic and timer ticks in the trace")
    r.add_argument("--check", action="store_true", help="also verify the trace")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="verify protocol invariants over a trace file")
    c.add_argument("--trace", required=True, help="trace path ('-' for stdin)")
    c.set_defaults(func=cmd_check)

    v = sub.add_parser("converge", help="run a scenario and check replica convergence")
    v.add_argument("--scenario", required=True)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--max-time", type=int, default=None)
    v.set_defaults(func=cmd_converge)

    g = sub.add_parser("gen", help="write a random fault-free scenario")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--writes", type=int, default=10)
    g.add_argument("--reads", type=int, default=0)
    g.add_argument("--entry", default="semi,primary",
                   help="comma list of entry roles: semi, sync, primary, any")
    g.add_argument("--span", type=int, default=1000, help="issue times fall in [0, span) ms")
    g.add_argument("--jitter", type=int, default=0)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_gen)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
