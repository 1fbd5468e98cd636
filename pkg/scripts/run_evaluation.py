"""Evaluate localization with and without purification over the bundled corpus.

Writes the JSON report and prints a per-technique summary table.
"""

from __future__ import annotations

import argparse
import sys

from purifl import pipeline


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sample", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="evaluation/report.json")
    args = ap.parse_args(argv)

    config = pipeline.RunConfig(sample=args.sample, seed=args.seed, workers=args.workers, out=args.out)
    report = pipeline.evaluate(config)
    pipeline.write_report(report, "json", args.out)

    print(f"{report.detected} detected of {report.generated} generated; {len(report.mutant_ids())} evaluated")
    print(f"{'technique':<12} {'pos':>4} {'neg':>4} {'neu':>4} {'save':>7} {'opt-reg':>8}")
    for name, a in report.aggregates().items():
        print(f"{name:<12} {a['positive']:>4} {a['negative']:>4} {a['neutral']:>4} "
              f"{a['mean_stmt_save']:>7.2f} {a['optimal_regressions']:>4}/{a['optimal_total']:<3}")
    print(f"report: {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
