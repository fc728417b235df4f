"""Perturbation generators and stability harnesses: graded corruptions,
rotation scenarios, batch/shuffle checks, and the volume scaling run."""

from __future__ import annotations

import time
import tracemalloc
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument
from .geometry import PointCloud, apply_rotation, random_rotation
from .pipeline import PipelineConfig, encode_classification

KIND_JITTER = "jitter"
KIND_GLOBAL_NOISE = "global_noise"
OUTLIER_LABEL = -1
SCENARIOS = ("zz", "zso3", "so3so3")
DEFAULT_BATCH_SIZES = (1, 2, 4, 8, 16, 32)


@dataclass
class CorruptionSpec:
    """Severity-graded corruption. Jitter adds per-coordinate Gaussian noise
    of sigma_step * severity (assumes unit-sphere-scale clouds); global noise
    appends outlier_step * severity uniform points in the cloud's bounding
    cube scaled by cube_scale."""

    kind: str
    severity: int
    seed: int = 0
    sigma_step: float = 0.01
    outlier_step: int = 10
    cube_scale: float = 1.5

    def __post_init__(self):
        if self.kind not in (KIND_JITTER, KIND_GLOBAL_NOISE):
            raise InvalidArgument(f"unknown corruption kind {self.kind!r}")
        if self.severity not in (1, 2, 3, 4, 5):
            raise InvalidArgument(f"severity must be 1..5, got {self.severity}")


def apply_jitter(cloud: PointCloud, spec: CorruptionSpec) -> PointCloud:
    if spec.kind != KIND_JITTER:
        raise InvalidArgument(f"spec kind {spec.kind!r} is not jitter")
    rng = np.random.default_rng(spec.seed)
    sigma = spec.sigma_step * spec.severity
    noise = rng.normal(0.0, sigma, size=cloud.points.shape)
    return PointCloud(
        points=cloud.points + noise,
        normals=cloud.normals,
        point_labels=cloud.point_labels,
        class_label=cloud.class_label,
    )


def apply_global_noise(cloud: PointCloud, spec: CorruptionSpec) -> PointCloud:
    """Append outliers; original points are untouched. Appended points carry
    the reserved label sentinel when per-point labels exist, and a placeholder
    unit normal when normals exist."""
    if spec.kind != KIND_GLOBAL_NOISE:
        raise InvalidArgument(f"spec kind {spec.kind!r} is not global_noise")
    rng = np.random.default_rng(spec.seed)
    count = spec.outlier_step * spec.severity
    lo = cloud.points.min(axis=0)
    hi = cloud.points.max(axis=0)
    center = (lo + hi) / 2.0
    half = max(float((hi - lo).max()) / 2.0, 1e-9) * spec.cube_scale
    outliers = rng.uniform(center - half, center + half, size=(count, 3))
    labels = None
    if cloud.point_labels is not None:
        labels = np.concatenate(
            [cloud.point_labels, np.full(count, OUTLIER_LABEL, dtype=np.int64)]
        )
    normals = None
    if cloud.normals is not None:
        filler = np.tile(np.array([0.0, 0.0, 1.0]), (count, 1))
        normals = np.concatenate([cloud.normals, filler])
    return PointCloud(
        points=np.concatenate([cloud.points, outliers]),
        normals=normals,
        point_labels=labels,
        class_label=cloud.class_label,
    )


def _scenario_modes(scenario: str):
    if scenario not in SCENARIOS:
        raise InvalidArgument(f"unknown scenario {scenario!r}, expected one of {SCENARIOS}")
    return {"zz": ("z", "z"), "zso3": ("z", "so3"), "so3so3": ("so3", "so3")}[scenario]


def rotation_scenario(train_clouds: Sequence[PointCloud],
                      test_clouds: Sequence[PointCloud],
                      scenario: str, seed: int = 0):
    """Rotate both splits; each cloud gets its own deterministic rotation."""
    train_mode, test_mode = _scenario_modes(scenario)

    def rotate(clouds, mode, tag):
        out = []
        for i, c in enumerate(clouds):
            sub = int(np.random.SeedSequence([int(seed), tag, i]).generate_state(1)[0])
            out.append(apply_rotation(c, random_rotation(sub, mode)))
        return out

    return rotate(train_clouds, train_mode, 0), rotate(test_clouds, test_mode, 1)


@dataclass
class StabilityRow:
    batch_size: int
    shuffled: bool
    max_deviation: float


@dataclass
class StabilityReport:
    rows: list

    @property
    def max_deviation(self) -> float:
        return max(r.max_deviation for r in self.rows)


def shuffle_stability_check(clouds: Sequence[PointCloud],
                            batch_sizes: Sequence[int] = DEFAULT_BATCH_SIZES,
                            shuffle: bool = False,
                            cfg: Optional[PipelineConfig] = None,
                            seed: int = 0) -> StabilityReport:
    """Encode every cloud under each batch size (optionally with shuffled
    processing order) and report the max-abs deviation from the batch-size-1
    unshuffled reference. The contract is zero deviation."""
    cfg = cfg or PipelineConfig()
    reference = [encode_classification(c, cfg) for c in clouds]
    rng = np.random.default_rng(seed)
    rows = []
    for bs in batch_sizes:
        if bs < 1:
            raise InvalidArgument(f"batch size must be >= 1, got {bs}")
        order = rng.permutation(len(clouds)) if shuffle else np.arange(len(clouds))
        feats: list = [None] * len(clouds)
        for s in range(0, len(order), bs):
            for i in order[s:s + bs]:
                feats[i] = encode_classification(clouds[i], cfg)
        dev = max(
            float(np.abs(feats[i] - reference[i]).max()) for i in range(len(clouds))
        )
        rows.append(StabilityRow(int(bs), bool(shuffle), dev))
    return StabilityReport(rows)


@dataclass
class ScalingReport:
    point_counts: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    peak_memory: list = field(default_factory=list)
    failed_at: Optional[int] = None

    def loglog_time_slope(self) -> float:
        return fit_loglog_slope(self.point_counts, self.wall_times)


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) < 2:
        raise InvalidArgument("need at least two samples to fit a slope")
    return float(np.polyfit(np.log(np.asarray(xs, float)),
                            np.log(np.asarray(ys, float)), 1)[0])


def volume_scaling_run(start: int = 1024, step: int = 1024, limit: int = 65536,
                       cfg: Optional[PipelineConfig] = None, seed: int = 0) -> ScalingReport:
    """Encode uniform random clouds of growing size, recording wall time and
    the allocator-level peak of each encode call. An allocation failure is
    recorded as the terminal point rather than raised."""
    if limit < start:
        raise InvalidArgument(f"limit {limit} must be >= start {start}")
    cfg = cfg or PipelineConfig()
    report = ScalingReport()
    for n in range(start, limit + 1, step):
        sub = int(np.random.SeedSequence([int(seed), n]).generate_state(1)[0])
        rng = np.random.default_rng(sub)
        cloud = PointCloud(rng.uniform(-1.0, 1.0, size=(n, 3)))
        tracemalloc.start()
        t0 = time.perf_counter()
        try:
            encode_classification(cloud, cfg)
        except MemoryError:
            report.failed_at = n
            return report
        finally:
            elapsed = time.perf_counter() - t0
            _, peak = tracemalloc.get_traced_memory()
            tracemalloc.stop()
        report.point_counts.append(n)
        report.wall_times.append(elapsed)
        report.peak_memory.append(int(peak))
    return report
