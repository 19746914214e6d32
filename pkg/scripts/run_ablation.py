"""Ablation study: states expanded per optimization toggle on generated instances.

    python3 scripts/run_ablation.py --instances 200 --seed 2024 --out ablation.csv
"""

from __future__ import annotations

import argparse
import csv
import statistics
import sys

from declarealign.harness import ABLATIONS, TOGGLES, run_suite


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--max-cost", type=float, default=6)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="per-instance CSV (optional)")
    args = p.parse_args(argv)

    report = run_suite(
        args.instances, args.seed, max_cost=args.max_cost, admissibility=False, jobs=args.jobs,
        alphabet_size=5, constraint_count=4, trace_length=8,
    )
    names = list(ABLATIONS)
    print(f"{'config':8s} {'mean expanded':>14s} {'median':>8s} {'max':>8s}")
    for name in names:
        xs = [r.runs[name].expanded for r in report.reports]
        print(f"{name:8s} {statistics.mean(xs):14.1f} {statistics.median(xs):8.1f} {max(xs):8d}")
    for name, label in TOGGLES.items():
        print(f"{label} non-monotone: {len(report.nonmonotone(name))}/{len(report.reports)}")
    print(f"cost changes across configs: {len(report.ablation_cost_changes)}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "oracle_cost"] + [f"{n}_expanded" for n in names])
            for r in report.reports:
                w.writerow([r.seed, r.oracle_cost] + [r.runs[n].expanded for n in names])
    return 0


if __name__ == "__main__":
    sys.exit(main())
