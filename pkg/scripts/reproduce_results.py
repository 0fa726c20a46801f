#!/usr/bin/env python3
"""Full experiment reproduction: valuation trends, similarity sweep, timings.

Runs the whole pipeline (ground truth per noise level, protocol runs for
every group count, CSV/JSON outputs) with the default desk-scale settings
and prints a short summary table. Equivalent to `fedeval run` with the
defaults; kept as a script so the sweep is one command during research.

Usage: python scripts/reproduce_results.py [--out DIR] [--data CSV]
"""

import argparse
import os
import sys

for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

from scipy.stats import spearmanr

from fedeval.data import ensure_dataset
from fedeval.experiments import ExperimentConfig, run_experiment_suite, write_report_files


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    parser.add_argument("--data", default=None)
    parser.add_argument("--rounds", type=int, default=20)
    parser.add_argument("--sigma", default="0,0.05,0.1,0.2,0.5")
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    cfg = ExperimentConfig(
        data_path=ensure_dataset(args.data, args.out),
        sigma_grid=tuple(float(s) for s in args.sigma.split(",")),
        rounds=args.rounds,
    )
    report = run_experiment_suite(cfg)
    write_report_files(report, args.out)

    grid = sorted(next(iter(report.similarity.values())))
    print(f"{'sigma':>6} | " + " ".join(f"m={m:<2}" for m in grid) + " | trend")
    for sigma in report.similarity:
        sims = [report.similarity[sigma][m] for m in grid]
        rho = spearmanr(sims, grid).statistic
        print(f"{sigma:>6} | " + " ".join(f"{s:.2f}" for s in sims) + f" | {rho:+.2f}")
    print()
    for sigma in report.native_seconds:
        best_m = max(report.group_seconds[sigma])
        print(
            f"sigma={sigma}: group(m={best_m}) {report.group_seconds[sigma][best_m]:.2f}s"
            f" vs native {report.native_seconds[sigma]:.2f}s"
            f" ({report.models_per_round}/round vs {report.native_models} models)"
        )
    problems = report.validate()
    for problem in problems:
        print(f"INVARIANT VIOLATION: {problem}", file=sys.stderr)
    print(f"outputs in {args.out}/")
    return 1 if problems else 0


if __name__ == "__main__":
    raise SystemExit(main())
