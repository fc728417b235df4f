"""Hierarchical encoders: halving sampling cascade for classification and
segmentation, plus inverse-distance feature propagation for decoding."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .descriptors import (
    DESCRIPTOR_KINDS,
    KIND_GEO,
    KIND_RISP,
    KIND_XYZ,
    estimate_normals,
    pcsd_geo,
    risp_values,
    xyz_neighbor_values,
)
from .errors import InvalidArgument
from .geometry import PointCloud, farthest_point_sample, knn
from .graph import POOLING, VARIANTS, empowered_block, united_block

INTERP_EPS = 1e-8


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable the encoders expose.

    k_per_stage must have one entry per stage; descriptor is one of
    "xyz", "geo", "risp". `normalize` toggles the per-point std division,
    `unit_sphere` the per-cloud centering/rescaling done before encoding.
    """

    stages: int = 4
    k_per_stage: tuple = (16, 16, 16, 16)
    alpha: float = 1.0
    pooling: str = "max"
    descriptor: str = KIND_XYZ
    interp_k: int = 3
    seed: int = 0
    normalize: bool = True
    unit_sphere: bool = True
    variant: str = "tfcw"
    normal_k: int = 8

    def __post_init__(self):
        object.__setattr__(self, "k_per_stage", tuple(int(k) for k in self.k_per_stage))
        if self.stages < 1:
            raise InvalidArgument(f"stages must be >= 1, got {self.stages}")
        if len(self.k_per_stage) != self.stages:
            raise InvalidArgument(
                f"k_per_stage needs {self.stages} entries, got {len(self.k_per_stage)}"
            )
        if any(k < 2 for k in self.k_per_stage):
            raise InvalidArgument("every k must be >= 2")
        if self.interp_k < 1:
            raise InvalidArgument(f"interp_k must be >= 1, got {self.interp_k}")
        if self.pooling not in POOLING:
            raise InvalidArgument(f"unknown pooling {self.pooling!r}")
        if self.descriptor not in DESCRIPTOR_KINDS:
            raise InvalidArgument(f"unknown descriptor {self.descriptor!r}")
        if self.variant not in VARIANTS:
            raise InvalidArgument(f"unknown variant {self.variant!r}")


@dataclass
class StageOutput:
    """Sampled coordinates and their per-point features for one level."""

    points: np.ndarray
    features: np.ndarray


def unit_sphere_normalized(cloud: PointCloud) -> PointCloud:
    """Centroid to the origin, maximum radius to 1. Degenerate single-point
    clouds keep scale 1."""
    pts = cloud.points - cloud.points.mean(axis=0)
    radius = np.linalg.norm(pts, axis=1).max()
    if radius > 0:
        pts = pts / radius
    return replace(cloud, points=pts)


def _prepare(cloud: PointCloud, cfg: PipelineConfig) -> PointCloud:
    if cfg.unit_sphere:
        cloud = unit_sphere_normalized(cloud)
    if cfg.descriptor == KIND_RISP and cloud.normals is None:
        normals, _ = estimate_normals(cloud, cfg.normal_k)
        cloud = replace(cloud, normals=normals)
    return cloud


def _grouped_descriptors(prev: PointCloud, sampled: PointCloud, k: int,
                         cfg: PipelineConfig) -> np.ndarray:
    """Group each sampled point's k nearest descriptors from the unsampled
    set. xyz and risp group by coordinates; geo groups in descriptor space."""
    if k > prev.n:
        raise InvalidArgument(f"k={k} exceeds available reference points ({prev.n})")
    kind = cfg.descriptor
    if kind == KIND_XYZ:
        nn = knn(sampled.points, prev.points, k)
        return xyz_neighbor_values(sampled.points, prev.points[nn.indices])
    if kind == KIND_GEO:
        d_prev = pcsd_geo(prev).values
        d_samp = pcsd_geo(sampled).values
        nn = knn(d_samp, d_prev, k)
        return d_prev[nn.indices]
    nn = knn(sampled.points, prev.points, k)
    vals, _ = risp_values(
        sampled.points, sampled.normals,
        prev.points[nn.indices], prev.normals[nn.indices],
    )
    return vals


def _halved(n: int) -> int:
    return (n + 1) // 2


def _cascade(cloud: PointCloud, cfg: PipelineConfig):
    """Yield (prev, sampled, k) per stage, halving the cloud each time."""
    prev = cloud
    for s in range(cfg.stages):
        idx = farthest_point_sample(prev.points, _halved(prev.n))
        sampled = prev.subset(idx)
        yield prev, sampled, cfg.k_per_stage[s]
        prev = sampled


def _normalize_vector(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def encode_classification(cloud: PointCloud, cfg: Optional[PipelineConfig] = None) -> np.ndarray:
    """Global feature vector: per stage, sample half the points, group their
    k nearest descriptors from the unsampled set, and run the united block;
    stage vectors are concatenated and scaled to unit length."""
    cfg = cfg or PipelineConfig()
    if cloud.n < 2 ** cfg.stages:
        raise InvalidArgument(
            f"need at least {2 ** cfg.stages} points for {cfg.stages} stages, got {cloud.n}"
        )
    prepared = _prepare(cloud, cfg)
    vecs = []
    for prev, sampled, k in _cascade(prepared, cfg):
        grouped = _grouped_descriptors(prev, sampled, k, cfg)
        vecs.append(
            united_block(grouped, alpha=cfg.alpha, pool=cfg.pooling,
                         normalize=cfg.normalize, variant=cfg.variant)
        )
    return _normalize_vector(np.concatenate(vecs))


def encode_segmentation(cloud: PointCloud, cfg: Optional[PipelineConfig] = None) -> list:
    """Per-level point features for the decoder.

    Level 0 is the full-resolution cloud grouped against itself (the finest
    skip connection); levels 1..stages follow the halving cascade. Every level
    carries empowered-block features of width C + C^2.
    """
    cfg = cfg or PipelineConfig()
    if cloud.n < 2 ** cfg.stages:
        raise InvalidArgument(
            f"need at least {2 ** cfg.stages} points for {cfg.stages} stages, got {cloud.n}"
        )
    prepared = _prepare(cloud, cfg)
    grouped0 = _grouped_descriptors(prepared, prepared, cfg.k_per_stage[0], cfg)
    levels = [
        StageOutput(
            prepared.points.copy(),
            empowered_block(grouped0, alpha=cfg.alpha,
                            normalize=cfg.normalize, variant=cfg.variant),
        )
    ]
    for prev, sampled, k in _cascade(prepared, cfg):
        grouped = _grouped_descriptors(prev, sampled, k, cfg)
        levels.append(
            StageOutput(
                sampled.points.copy(),
                empowered_block(grouped, alpha=cfg.alpha,
                                normalize=cfg.normalize, variant=cfg.variant),
            )
        )
    return levels


def interpolation_weights(source_points, target_points, interp_k: int = 3):
    """Per-target inverse-distance weights over the interp_k nearest sources.

    Weights are (d + 1e-8)^-1 normalized per target (non-negative, summing
    to 1), so a coincident source dominates its target.
    Returns (weights, source indices), both T x interp_k.
    """
    src = np.asarray(source_points, dtype=np.float64)
    tgt = np.asarray(target_points, dtype=np.float64)
    if src.shape[0] < interp_k:
        raise InvalidArgument(
            f"need at least interp_k={interp_k} sources, got {src.shape[0]}"
        )
    nn = knn(tgt, src, interp_k)
    w = 1.0 / (nn.distances + INTERP_EPS)
    w /= w.sum(axis=1, keepdims=True)
    return w, nn.indices


def propagate_features(source_points, source_feats, target_points,
                       interp_k: int = 3) -> np.ndarray:
    """Inverse-distance weighted interpolation of source features onto the
    target points."""
    src = np.asarray(source_points, dtype=np.float64)
    feats = np.asarray(source_feats, dtype=np.float64)
    if feats.shape[0] != src.shape[0]:
        raise InvalidArgument("source features must match source points")
    w, idx = interpolation_weights(src, target_points, interp_k)
    return np.einsum("tk,tkf->tf", w, feats[idx])


def decode_segmentation(stage_outputs: list, cfg: Optional[PipelineConfig] = None) -> np.ndarray:
    """Walk the levels coarse to fine, propagating features to the next finer
    level and concatenating that level's skip features; rows come out
    unit-normalized and cover the original point count.

    When a coarse level holds fewer points than interp_k (single-point deep
    stages), interpolation falls back to the points available.
    """
    cfg = cfg or PipelineConfig()
    if not stage_outputs:
        raise InvalidArgument("stage_outputs is empty")
    for coarse_pos in range(1, len(stage_outputs)):
        fine_n = stage_outputs[coarse_pos - 1].points.shape[0]
        coarse_n = stage_outputs[coarse_pos].points.shape[0]
        if coarse_n != _halved(fine_n):
            raise InvalidArgument(
                f"stage chain mismatch: level {coarse_pos} has {coarse_n} points, "
                f"expected {_halved(fine_n)}"
            )
    feats = stage_outputs[-1].features
    for level in range(len(stage_outputs) - 2, -1, -1):
        coarse = stage_outputs[level + 1]
        propagated = propagate_features(
            coarse.points, feats, stage_outputs[level].points,
            min(cfg.interp_k, coarse.points.shape[0]),
        )
        feats = np.concatenate([propagated, stage_outputs[level].features], axis=1)
    norms = np.linalg.norm(feats, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return feats / norms
