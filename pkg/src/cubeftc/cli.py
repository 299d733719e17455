"""Command line entry point: ``cubeftc run | list | describe``.

Exit codes: 0 when every check meets its expectation, 1 when some check
does not, 2 for unreadable or invalid scenarios and bad arguments.
"""

from __future__ import annotations

import argparse
import json
import sys

from .scenario import (
    ScenarioError,
    bundled_path,
    bundled_scenarios,
    emit_report,
    load_scenario,
    run_scenario,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2


def _status(outcome) -> str:
    if outcome.expect_fail:
        return "XFAIL" if not outcome.report.passed else "XPASS"
    return "PASS" if outcome.report.passed else "FAIL"


def _summary(report, stream) -> None:
    for c in report.checks:
        r = c.report
        print(
            f"{_status(c):5s} {c.id:32s} err={r.abs_error:.3e} budget={r.budget:.3e}",
            file=stream,
        )
    verdict = "ok" if report.passed else "FAILED"
    print(f"{report.scenario}: {verdict} ({len(report.checks)} checks, {report.wall_time:.2f}s)", file=stream)


def _cmd_run(args) -> int:
    try:
        overrides = list(args.override)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        scenario = load_scenario(args.scenario, overrides)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = run_scenario(scenario)
    to_stdout = args.out == "-"
    _summary(report, sys.stderr if to_stdout else sys.stdout)
    if args.out:
        try:
            text = emit_report(report, args.format, None if to_stdout else args.out, args.timing)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_INVALID
        if to_stdout:
            sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_FAILED


def _cmd_list(args) -> int:
    for name in bundled_scenarios():
        raw = json.loads(bundled_path(name).read_text())
        print(f"{name:32s} {raw.get('description', '')}")
    return EXIT_OK


def _cmd_describe(args) -> int:
    try:
        sc = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"{sc.name} (dim {sc.dim}, seed {sc.seed})")
    if sc.description:
        print(sc.description)
    for c in sc.checks:
        flag = "  [expect fail]" if c.expect_fail else ""
        print(f"  {c.id}{flag}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cubeftc", description="Run verification scenarios for cube functions.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or bundled scenario")
    run.add_argument("scenario", help="path to a JSON scenario or a bundled scenario name")
    run.add_argument("--seed", type=int, help="replace the scenario seed")
    run.add_argument("--out", help="write the report here ('-' for stdout)")
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="set a scenario field by dotted path")
    run.add_argument("--timing", action="store_true", help="include wall time in JSON reports")
    run.set_defaults(fn=_cmd_run)

    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.set_defaults(fn=_cmd_list)

    desc = sub.add_parser("describe", help="show a scenario's checks")
    desc.add_argument("scenario")
    desc.set_defaults(fn=_cmd_describe)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
