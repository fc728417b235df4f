#!/usr/bin/env python3
"""Measure encode wall time and allocator peak memory on growing random
clouds; prints the log-log time slope.

Usage: python scripts/run_scaling.py [--limit 65536] [--out scaling.csv]
"""

import argparse
import csv

from tfcw.pipeline import PipelineConfig
from tfcw.robustness import volume_scaling_run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--start", type=int, default=1024)
    ap.add_argument("--step", type=int, default=1024)
    ap.add_argument("--limit", type=int, default=16384)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    report = volume_scaling_run(args.start, args.step, args.limit,
                                PipelineConfig(seed=args.seed), seed=args.seed)
    for n, t, m in zip(report.point_counts, report.wall_times, report.peak_memory):
        print(f"{n:>8} pts  {t:8.3f} s  {m / 1e6:9.1f} MB")
    if report.failed_at is not None:
        print(f"allocation failure at {report.failed_at} points")
    if len(report.point_counts) >= 2:
        print(f"log-log time slope: {report.loglog_time_slope():.3f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["points", "wall_time_s", "peak_memory_bytes"])
            writer.writerows(zip(report.point_counts, report.wall_times,
                                 report.peak_memory))
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
