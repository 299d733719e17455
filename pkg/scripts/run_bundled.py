"""Run every bundled scenario and print a timing table.

    python scripts/run_bundled.py [--out-dir reports/]
"""

import argparse
import sys
import time
from pathlib import Path

from cubeftc.scenario import bundled_path, bundled_scenarios, emit_report, run_scenario


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", type=Path, help="write one JSON report per scenario here")
    args = ap.parse_args()
    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
    total = 0.0
    failed = []
    for name in bundled_scenarios():
        t0 = time.perf_counter()
        report = run_scenario(bundled_path(name))
        dt = time.perf_counter() - t0
        total += dt
        n_xfail = sum(c.expect_fail for c in report.checks)
        print(f"{name:30s} {'ok' if report.passed else 'FAILED':7s} {len(report.checks):3d} checks  {n_xfail} expected-fail  {dt:6.2f}s")
        if not report.passed:
            failed.append(name)
        if args.out_dir:
            emit_report(report, "json", args.out_dir / f"{name}.json")
    print(f"total {total:.2f}s, {len(failed)} failing")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
