"""Seeded synthetic benchmarks: a two-class shape set (spheres vs cubes) and
a two-part segmentation set (cylinder body with a spherical cap)."""

from __future__ import annotations

import numpy as np

from .datasets import Dataset
from .geometry import PointCloud


def _sphere_surface(rng, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


def _cube_surface(rng, n: int) -> np.ndarray:
    # pick a face uniformly, then a point uniformly on it
    face = rng.integers(0, 6, size=n)
    uv = rng.uniform(-1.0, 1.0, size=(n, 2))
    pts = np.empty((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    for a in range(3):
        mask = axis == a
        others = [d for d in range(3) if d != a]
        pts[mask, a] = sign[mask]
        pts[np.ix_(mask, others)] = uv[mask]
    return pts


def _shape_cloud(rng, label: int, points: int) -> PointCloud:
    base = _sphere_surface(rng, points) if label == 0 else _cube_surface(rng, points)
    scale = rng.uniform(0.85, 1.15, size=3)
    noise = rng.normal(0.0, 0.005, size=base.shape)
    return PointCloud(base * scale + noise, class_label=label)


def synthetic_classification(n_train: int = 100, n_test: int = 100,
                             points: int = 1024, seed: int = 0):
    """Balanced sphere/cube datasets: label 0 = sphere, label 1 = cube."""
    rng = np.random.default_rng(seed)

    def make(count, split):
        clouds = [_shape_cloud(rng, i % 2, points) for i in range(count)]
        return Dataset(name=f"synthetic-shapes-{split}", clouds=clouds,
                       split=split, num_classes=2)

    return make(n_train, "train"), make(n_test, "test")


def _capped_cylinder(rng, points: int) -> PointCloud:
    """Lateral cylinder surface (part 0) plus a hemispherical cap (part 1),
    points allocated by surface area."""
    radius, height = 0.5, 1.5
    area_side = 2.0 * np.pi * radius * height
    area_cap = 2.0 * np.pi * radius ** 2
    n_cap = max(8, int(round(points * area_cap / (area_side + area_cap))))
    n_side = points - n_cap

    theta = rng.uniform(0.0, 2.0 * np.pi, size=n_side)
    z = rng.uniform(-height, 0.0, size=n_side)
    side = np.stack([radius * np.cos(theta), radius * np.sin(theta), z], axis=1)

    cap = _sphere_surface(rng, n_cap) * radius
    cap[:, 2] = np.abs(cap[:, 2])  # upper hemisphere, sitting on the cylinder top

    pts = np.concatenate([side, cap])
    labels = np.concatenate([np.zeros(n_side, np.int64), np.ones(n_cap, np.int64)])
    jitter = rng.normal(0.0, 0.005, size=pts.shape)
    scale = rng.uniform(0.9, 1.1)
    return PointCloud(pts * scale + jitter, point_labels=labels, class_label=0)


def synthetic_segmentation(n_train: int = 20, n_test: int = 20,
                           points: int = 512, seed: int = 1):
    """Two-part shapes with per-point labels; part 0 body, part 1 cap."""
    rng = np.random.default_rng(seed)

    def make(count, split):
        clouds = [_capped_cylinder(rng, points) for _ in range(count)]
        return Dataset(name=f"synthetic-parts-{split}", clouds=clouds,
                       split=split, num_classes=2)

    return make(n_train, "train"), make(n_test, "test")
