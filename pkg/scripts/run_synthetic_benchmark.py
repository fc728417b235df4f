#!/usr/bin/env python3
"""Run the built-in synthetic benchmarks end to end and print a summary.

Usage: python scripts/run_synthetic_benchmark.py [--seed 0] [--out results.json]
"""

import argparse

from tfcw.pipeline import PipelineConfig
from tfcw.runner import emit_results, run_classify, run_segment
from tfcw.synthetic import synthetic_classification, synthetic_segmentation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--train", type=int, default=100, help="classification clouds per split")
    ap.add_argument("--points", type=int, default=1024)
    ap.add_argument("--gamma", type=float, default=100.0)
    ap.add_argument("--out", default=None, help="write the classification result as JSON")
    args = ap.parse_args()

    cfg = PipelineConfig(seed=args.seed)
    train, test = synthetic_classification(args.train, args.train, args.points, args.seed)
    cls = run_classify(train, test, cfg, gamma=args.gamma)
    print(f"classification: accuracy {cls.metrics.overall_accuracy:.4f}  "
          f"throughput {cls.throughput:.1f} samples/s  gamma {cls.gamma:g}")

    seg_train, seg_test = synthetic_segmentation(20, 20, 512, args.seed + 1)
    seg = run_segment(seg_train, seg_test, cfg, gamma=1000.0)
    print(f"segmentation:   miou {seg.metrics.miou:.4f}  "
          f"accuracy {seg.metrics.overall_accuracy:.4f}  "
          f"throughput {seg.throughput:.1f} samples/s")

    if args.out:
        emit_results(cls, args.out, "json")
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
