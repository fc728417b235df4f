#!/usr/bin/env python3
"""Robustness sweeps on the synthetic classification set: corruption
severities, rotation scenarios, and batch/shuffle stability.

Usage: python scripts/run_robustness.py [--count 40] [--points 512]
"""

import argparse

from tfcw.datasets import Dataset
from tfcw.pipeline import PipelineConfig
from tfcw.robustness import (
    DEFAULT_BATCH_SIZES,
    SCENARIOS,
    CorruptionSpec,
    apply_global_noise,
    apply_jitter,
    rotation_scenario,
    shuffle_stability_check,
)
from tfcw.runner import run_classify
from tfcw.synthetic import synthetic_classification


def corrupted(test, kind, severity, seed):
    make = apply_jitter if kind == "jitter" else apply_global_noise
    clouds = [make(c, CorruptionSpec(kind, severity, seed=seed + i))
              for i, c in enumerate(test.clouds)]
    return Dataset(f"{test.name}-{kind}-s{severity}", clouds, "test", test.num_classes)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=40, help="clouds per split")
    ap.add_argument("--points", type=int, default=512)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--gamma", type=float, default=100.0)
    args = ap.parse_args()

    cfg = PipelineConfig(seed=args.seed)
    train, test = synthetic_classification(args.count, args.count,
                                           args.points, args.seed)
    base = run_classify(train, test, cfg, gamma=args.gamma)
    print(f"clean accuracy: {base.metrics.overall_accuracy:.4f}")

    for kind in ("jitter", "global_noise"):
        accs = []
        for severity in range(1, 6):
            res = run_classify(train, corrupted(test, kind, severity, args.seed),
                               cfg, gamma=args.gamma)
            accs.append(res.metrics.overall_accuracy)
        pretty = "  ".join(f"S{i + 1}={a:.3f}" for i, a in enumerate(accs))
        print(f"{kind:>12}: {pretty}")

    for scenario in SCENARIOS:
        r_train, r_test = rotation_scenario(train.clouds, test.clouds,
                                            scenario, seed=args.seed)
        res = run_classify(
            Dataset(train.name, r_train, "train", train.num_classes),
            Dataset(test.name, r_test, "test", test.num_classes),
            cfg, gamma=args.gamma,
        )
        print(f"rotation {scenario:>7}: accuracy {res.metrics.overall_accuracy:.4f}")

    for shuffled in (False, True):
        rep = shuffle_stability_check(test.clouds[:16], DEFAULT_BATCH_SIZES,
                                      shuffle=shuffled, cfg=cfg, seed=args.seed)
        tag = "shuffled" if shuffled else "ordered"
        print(f"stability ({tag:>8}): max feature deviation {rep.max_deviation:g}")


if __name__ == "__main__":
    main()
