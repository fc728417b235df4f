"""Command line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from dataclasses import replace

import click
import numpy as np

from .bank import build_bank, load_bank, save_bank
from .datasets import Dataset, convert_off_tree, load_points_bin, save_points_bin
from .errors import InvalidArgument, InvalidInput, ParseError
from .pipeline import PipelineConfig, encode_classification
from .robustness import (
    DEFAULT_BATCH_SIZES,
    SCENARIOS,
    CorruptionSpec,
    apply_global_noise,
    apply_jitter,
    rotation_scenario,
    shuffle_stability_check,
    volume_scaling_run,
)
from .runner import (
    ABLATION_STUDIES,
    emit_results,
    load_config,
    run_ablation,
    run_classify,
    run_segment,
    write_ablation_csv,
)
from . import synthetic


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InvalidArgument as exc:
            click.echo(f"usage error: {exc}", err=True)
            sys.exit(2)
        except (InvalidInput, ParseError, OSError) as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(3)
        except click.ClickException:
            raise
        except Exception as exc:  # invariant violation or bug
            click.echo(f"internal error: {exc}", err=True)
            sys.exit(4)

    return wrapper


def _pipeline_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(exists=True),
                     default=None, help="JSON config file."),
        click.option("--seed", type=int, default=None),
        click.option("--k", "k_list", type=str, default=None,
                     help="Comma-separated neighbors per stage, e.g. 16,16,16,16."),
        click.option("--alpha", type=float, default=None),
        click.option("--gamma", type=float, default=None),
        click.option("--descriptor", type=click.Choice(["xyz", "geo", "risp"]),
                     default=None),
        click.option("--stages", type=int, default=None),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_config(config_path, seed, k_list, alpha, gamma, descriptor, stages):
    cfg, extras = (PipelineConfig(), {}) if config_path is None else load_config(config_path)
    if stages is not None:
        ks = cfg.k_per_stage
        ks = ks[:stages] if len(ks) >= stages else ks + (ks[-1],) * (stages - len(ks))
        cfg = replace(cfg, stages=stages, k_per_stage=ks)
    if k_list is not None:
        ks = tuple(int(tok) for tok in k_list.split(","))
        if len(ks) == 1:
            ks = ks * cfg.stages
        cfg = replace(cfg, k_per_stage=ks, stages=len(ks))
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if alpha is not None:
        cfg = replace(cfg, alpha=alpha)
    if descriptor is not None:
        cfg = replace(cfg, descriptor=descriptor)
    if gamma is None:
        gamma = float(extras.get("gamma", 100.0))
    return cfg, gamma, extras


def _load_split(path, split, arg_name):
    if path is None:
        raise InvalidArgument(f"--{arg_name} is required (a .tfcwpts file)")
    return load_points_bin(path, split=split)


@click.group()
def main():
    """Non-parametric point cloud analysis toolkit."""


@main.command()
@click.argument("source", type=click.Path(exists=True))
@click.argument("out", type=click.Path())
@click.option("--split", type=click.Choice(["train", "test", "val"]), default="train")
@click.option("--points", type=int, default=1024, help="Surface samples per mesh.")
@click.option("--seed", type=int, default=0)
@guarded
def convert(source, out, split, points, seed):
    """Convert OFF meshes (file or class-per-directory tree) to a points container."""
    ds = convert_off_tree(source, out, split=split, sample_points=points, seed=seed)
    click.echo(f"wrote {len(ds)} clouds ({ds.num_classes} classes) to {out}")


@main.command()
@click.option("--train", "train_path", type=click.Path(exists=True), default=None)
@click.option("--test", "test_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@click.option("--sweep-gamma", "do_sweep", is_flag=True, default=False)
@_pipeline_options
@guarded
def classify(train_path, test_path, out, fmt, do_sweep, **cfg_kwargs):
    """Classify a test split against a training-split memory bank."""
    cfg, gamma, extras = _build_config(**cfg_kwargs)
    train = _load_split(train_path or extras.get("train"), "train", "train")
    test = _load_split(test_path or extras.get("test"), "test", "test")
    grid = (1.0, 10.0, 100.0, 1000.0) if do_sweep else None
    result = run_classify(train, test, cfg, gamma=gamma, gamma_grid=grid)
    click.echo(
        f"accuracy {result.metrics.overall_accuracy:.4f} "
        f"({result.throughput:.1f} samples/s, gamma {result.gamma:g})"
    )
    if out:
        emit_results(result, out, fmt)
        click.echo(f"wrote {out}")


@main.command()
@click.option("--train", "train_path", type=click.Path(exists=True), default=None)
@click.option("--test", "test_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@_pipeline_options
@guarded
def segment(train_path, test_path, out, fmt, **cfg_kwargs):
    """Part segmentation with a per-point memory bank."""
    cfg, gamma, extras = _build_config(**cfg_kwargs)
    train = _load_split(train_path or extras.get("train"), "train", "train")
    test = _load_split(test_path or extras.get("test"), "test", "test")
    result = run_segment(train, test, cfg, gamma=gamma)
    click.echo(
        f"miou {result.metrics.miou:.4f} accuracy "
        f"{result.metrics.overall_accuracy:.4f} ({result.throughput:.1f} samples/s)"
    )
    if out:
        emit_results(result, out, fmt)
        click.echo(f"wrote {out}")


@main.command()
@click.option("--which", type=click.Choice(list(ABLATION_STUDIES)), required=True)
@click.option("--train", "train_path", type=click.Path(exists=True), default=None)
@click.option("--test", "test_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
@_pipeline_options
@guarded
def ablate(which, train_path, test_path, out, **cfg_kwargs):
    """Run one ablation study and print (or write) its rows."""
    cfg, gamma, extras = _build_config(**cfg_kwargs)
    train = _load_split(train_path or extras.get("train"), "train", "train")
    test = _load_split(test_path or extras.get("test"), "test", "test")
    rows = run_ablation(train, test, cfg, which=which, gamma=gamma)
    for r in rows:
        click.echo(f"{r['study']:>13} {r['setting']:>16} "
                   f"acc {r['accuracy']:.4f} norm {r['normalized_accuracy']:.4f}")
    if out:
        write_ablation_csv(rows, out)
        click.echo(f"wrote {out}")


@main.command()
@click.option("--check", type=click.Choice(["jitter", "global", "rotation", "shuffle"]),
              required=True)
@click.option("--train", "train_path", type=click.Path(exists=True), default=None)
@click.option("--test", "test_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
@_pipeline_options
@guarded
def robustness(check, train_path, test_path, out, **cfg_kwargs):
    """Corruption, rotation, and batch/shuffle stability checks."""
    cfg, gamma, extras = _build_config(**cfg_kwargs)
    train = _load_split(train_path or extras.get("train"), "train", "train")
    test = _load_split(test_path or extras.get("test"), "test", "test")
    rows = []
    if check in ("jitter", "global"):
        kind = "jitter" if check == "jitter" else "global_noise"
        for severity in range(1, 6):
            corrupted = Dataset(
                name=f"{test.name}-{kind}-s{severity}",
                clouds=[
                    apply_jitter(c, CorruptionSpec(kind, severity, seed=cfg.seed + i))
                    if kind == "jitter"
                    else apply_global_noise(c, CorruptionSpec(kind, severity, seed=cfg.seed + i))
                    for i, c in enumerate(test.clouds)
                ],
                split="test",
                num_classes=test.num_classes,
            )
            res = run_classify(train, corrupted, cfg, gamma=gamma)
            rows.append((f"S{severity}", res.metrics.overall_accuracy))
    elif check == "rotation":
        for scenario in SCENARIOS:
            r_train, r_test = rotation_scenario(train.clouds, test.clouds,
                                                scenario, seed=cfg.seed)
            res = run_classify(
                Dataset(train.name, r_train, "train", train.num_classes),
                Dataset(test.name, r_test, "test", test.num_classes),
                cfg, gamma=gamma,
            )
            rows.append((scenario, res.metrics.overall_accuracy))
    else:
        for shuffled in (False, True):
            rep = shuffle_stability_check(test.clouds, DEFAULT_BATCH_SIZES,
                                          shuffle=shuffled, cfg=cfg, seed=cfg.seed)
            for row in rep.rows:
                rows.append((f"bs{row.batch_size}-"
                             f"{'shuffled' if row.shuffled else 'ordered'}",
                             row.max_deviation))
    for setting, value in rows:
        click.echo(f"{check:>9} {setting:>16} {value:.6g}")
    if out:
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["check", "setting", "value"])
            writer.writerows([(check, s, f"{v:.9g}") for s, v in rows])
        click.echo(f"wrote {out}")


@main.command()
@click.option("--start", type=int, default=1024)
@click.option("--step", type=int, default=1024)
@click.option("--limit", type=int, default=16384)
@click.option("--out", type=click.Path(), default=None)
@_pipeline_options
@guarded
def scale(start, step, limit, out, **cfg_kwargs):
    """Volume scaling: encode growing random clouds, record time and memory."""
    cfg, _, _ = _build_config(**cfg_kwargs)
    report = volume_scaling_run(start=start, step=step, limit=limit, cfg=cfg,
                                seed=cfg.seed)
    for n, t, m in zip(report.point_counts, report.wall_times, report.peak_memory):
        click.echo(f"{n:>8} pts  {t:8.3f} s  {m / 1e6:9.1f} MB")
    if report.failed_at is not None:
        click.echo(f"allocation failure at {report.failed_at} points")
    if len(report.point_counts) >= 2:
        click.echo(f"log-log time slope: {report.loglog_time_slope():.3f}")
    if out:
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["points", "wall_time_s", "peak_memory_bytes"])
            writer.writerows(zip(report.point_counts, report.wall_times,
                                 report.peak_memory))
        click.echo(f"wrote {out}")


@main.group()
def bank():
    """Export or import memory banks."""


@bank.command("export")
@click.option("--train", "train_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@_pipeline_options
@guarded
def bank_export(train_path, out, **cfg_kwargs):
    """Encode a training split and write its bank container."""
    cfg, gamma, _ = _build_config(**cfg_kwargs)
    train = load_points_bin(train_path, split="train")
    feats = np.stack([encode_classification(c, cfg) for c in train.clouds])
    b = build_bank(feats, train.class_labels(), train.num_classes, gamma=gamma)
    save_bank(b, out)
    click.echo(f"wrote bank with {b.size} rows x {b.features.shape[1]} dims to {out}")


@bank.command("import")
@click.argument("path", type=click.Path(exists=True))
@guarded
def bank_import(path):
    """Read a bank container and print its summary."""
    b = load_bank(path)
    counts = b.labels_onehot.sum(axis=0).astype(int)
    click.echo(json.dumps({
        "rows": b.size,
        "feature_width": b.features.shape[1],
        "num_classes": b.num_classes,
        "gamma": b.gamma,
        "per_class_counts": counts.tolist(),
    }, sort_keys=True))


@main.command()
@click.argument("kind", type=click.Choice(["classification", "segmentation"]))
@click.option("--out-train", type=click.Path(), required=True)
@click.option("--out-test", type=click.Path(), required=True)
@click.option("--count", type=int, default=None, help="Clouds per split.")
@click.option("--points", type=int, default=None)
@click.option("--seed", type=int, default=0)
@guarded
def synth(kind, out_train, out_test, count, points, seed):
    """Generate the built-in synthetic datasets as points containers."""
    if kind == "classification":
        tr, te = synthetic.synthetic_classification(
            n_train=count or 100, n_test=count or 100, points=points or 1024, seed=seed)
    else:
        tr, te = synthetic.synthetic_segmentation(
            n_train=count or 20, n_test=count or 20, points=points or 512, seed=seed)
    save_points_bin(tr, out_train)
    save_points_bin(te, out_test)
    click.echo(f"wrote {len(tr)} train clouds to {out_train} and "
               f"{len(te)} test clouds to {out_test}")


if __name__ == "__main__":
    main()
