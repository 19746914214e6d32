"""Cross-check the aligner against the brute-force oracle and list any failures.

    python3 scripts/verify_suite.py --instances 100 --seed 3
"""

from __future__ import annotations

import argparse
import sys
import time

from declarealign.harness import run_suite


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--max-cost", type=float, default=6)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args(argv)

    t0 = time.perf_counter()
    report = run_suite(args.instances, args.seed, max_cost=args.max_cost, jobs=args.jobs,
                       alphabet_size=5, constraint_count=4, trace_length=8)
    for line in report.summary_lines():
        print(line)
    for r in report.mismatches:
        print(f"  mismatch seed={r.seed} oracle={r.oracle_cost} got={r.runs['on']}")
    for f in report.validity_failures + report.admissibility_violations:
        print(f"  {f}")
    print(f"elapsed: {time.perf_counter() - t0:.1f}s")
    return 0 if report.failures() == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
