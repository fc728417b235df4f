"""Deterministic point-cloud primitives: sampling, neighbor search, rotations.

Everything here is a pure function of its inputs. Distances are compared as
squared values internally and reported as true Euclidean distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from .errors import InvalidArgument, InvalidInput

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]

# Above these sizes the accelerated code paths kick in; below them the plain
# exhaustive routes run (and are the ones checked bit-for-bit against oracles).
_FPS_BLOCK_MIN = 4096
_KNN_TREE_MIN = 8192
_KNN_DENSE_BUDGET = 4_000_000  # max Q*R entries held in one distance matrix


def _as_points(points, name: str = "points") -> FloatArray:
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise InvalidInput(f"{name} must be a 2-D array, got shape {pts.shape}")
    if pts.shape[0] < 1:
        raise InvalidInput(f"{name} must contain at least one row")
    if not np.isfinite(pts).all():
        raise InvalidInput(f"{name} contains non-finite values")
    return pts


@dataclass
class PointCloud:
    """N x 3 coordinates with optional unit normals and labels.

    Invariants are checked on construction: at least one finite point, unit
    normals (within 1e-6) when present, per-point labels matching N.
    """

    points: FloatArray
    normals: Optional[FloatArray] = None
    point_labels: Optional[IntArray] = None
    class_label: Optional[int] = None

    def __post_init__(self):
        self.points = _as_points(self.points)
        if self.points.shape[1] != 3:
            raise InvalidInput(f"points must be N x 3, got {self.points.shape}")
        n = self.points.shape[0]
        if self.normals is not None:
            nrm = np.ascontiguousarray(self.normals, dtype=np.float64)
            if nrm.shape != (n, 3):
                raise InvalidInput(f"normals must match points, got {nrm.shape}")
            lengths = np.linalg.norm(nrm, axis=1)
            if not np.all(np.abs(lengths - 1.0) <= 1e-6):
                raise InvalidInput("normals must have unit length within 1e-6")
            self.normals = nrm
        if self.point_labels is not None:
            lab = np.ascontiguousarray(self.point_labels, dtype=np.int64)
            if lab.shape != (n,):
                raise InvalidInput(f"point_labels must have length {n}, got {lab.shape}")
            self.point_labels = lab
        if self.class_label is not None:
            self.class_label = int(self.class_label)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def subset(self, indices) -> "PointCloud":
        """A new cloud keeping only the given point rows (labels follow)."""
        idx = np.asarray(indices, dtype=np.int64)
        return PointCloud(
            points=self.points[idx],
            normals=None if self.normals is None else self.normals[idx],
            point_labels=None if self.point_labels is None else self.point_labels[idx],
            class_label=self.class_label,
        )

@dataclass
class NeighborIndex:
    """Result of a k-nearest-neighbor query.

    Each row holds the k reference indices for one query, sorted ascending by
    distance with distance ties resolved toward the lower index.
    """

    indices: IntArray
    distances: FloatArray

    @property
    def k(self) -> int:
        return self.indices.shape[1]


# ---------------------------------------------------------------------------
# farthest point sampling
# ---------------------------------------------------------------------------


def farthest_point_sample(cloud, count: int, start: Optional[int] = None) -> IntArray:
    """Greedy max-min subsampling; returns `count` distinct point indices.

    `start=None` selects the canonical start (farthest from the centroid,
    coordinate-lexicographic tie-break) which makes the selected point set a
    function of the coordinate multiset rather than of the row order.
    An integer `start` fixes the first index; ties then resolve to the lowest
    index.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else _as_points(cloud)
    n = pts.shape[0]
    if not 1 <= count <= n:
        raise InvalidArgument(f"count must be in [1, {n}], got {count}")
    if start is not None and not 0 <= int(start) < n:
        raise InvalidArgument(f"start index {start} out of range for {n} points")
    if n > _FPS_BLOCK_MIN:
        return _fps_blocked(pts, count, start)
    return _fps_naive(pts, count, start)


def _lex_pick(values: FloatArray, cand: IntArray, pts: FloatArray, canonical: bool) -> int:
    """Pick among candidate indices achieving the same value."""
    if cand.size == 1 or not canonical:
        return int(cand[0])  # cand is ascending, so [0] is the lowest index
    c = pts[cand]
    order = np.lexsort((cand, c[:, 2], c[:, 1], c[:, 0]))
    return int(cand[order[0]])


def _argmax_tied(values: FloatArray, pts: FloatArray, canonical: bool) -> int:
    m = values.max()
    cand = np.flatnonzero(values == m)
    return _lex_pick(values, cand, pts, canonical)


def _sq_dist_to(pts: FloatArray, p: FloatArray) -> FloatArray:
    d = pts - p
    return np.einsum("ij,ij->i", d, d)


def _fps_naive(pts: FloatArray, count: int, start: Optional[int]) -> IntArray:
    n = pts.shape[0]
    canonical = start is None
    if canonical:
        centroid = pts.mean(axis=0)
        first = _argmax_tied(_sq_dist_to(pts, centroid), pts, canonical=True)
    else:
        first = int(start)
    out = np.empty(count, dtype=np.int64)
    out[0] = first
    best = _sq_dist_to(pts, pts[first])
    best[first] = -1.0  # selected points can never be re-chosen
    for m in range(1, count):
        nxt = _argmax_tied(best, pts, canonical)
        out[m] = nxt
        np.minimum(best, _sq_dist_to(pts, pts[nxt]), out=best)
        best[nxt] = -1.0
    return out


def _fps_blocked(pts: FloatArray, count: int, start: Optional[int]) -> IntArray:
    """Block-pruned greedy FPS, selection-for-selection identical to the naive
    loop: a block is skipped only when its bounding box provably keeps every
    stored minimum unchanged."""
    n = pts.shape[0]
    canonical = start is None

    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = hi - lo
    g = int(np.clip(round((n / 384.0) ** (1.0 / 3.0)), 1, 6))
    dims = np.where(span > 0, g, 1).astype(np.int64)
    width = np.where(span > 0, span / dims, 1.0)
    cell = np.minimum(((pts - lo) / width).astype(np.int64), dims - 1)
    np.clip(cell, 0, dims - 1, out=cell)
    flat = (cell[:, 0] * dims[1] + cell[:, 1]) * dims[2] + cell[:, 2]

    order = np.argsort(flat, kind="stable")
    p = np.ascontiguousarray(pts[order])
    orig = order.astype(np.int64)
    sf = flat[order]
    starts = np.flatnonzero(np.r_[True, sf[1:] != sf[:-1]])
    ends = np.r_[starts[1:], n]
    nblocks = starts.size
    starts_l = starts.tolist()
    ends_l = ends.tolist()
    box_lo = np.ascontiguousarray(np.minimum.reduceat(p, starts, axis=0))
    box_hi = np.ascontiguousarray(np.maximum.reduceat(p, starts, axis=0))
    pos_of = np.empty(n, dtype=np.int64)
    pos_of[orig] = np.arange(n)
    block_of = np.repeat(np.arange(nblocks), ends - starts).tolist()

    if canonical:
        centroid = pts.mean(axis=0)
        first = _argmax_tied(_sq_dist_to(pts, centroid), pts, canonical=True)
    else:
        first = int(start)

    out = np.empty(count, dtype=np.int64)
    out[0] = first
    c = pts[first]
    best = _sq_dist_to(p, c)
    best[pos_of[first]] = -1.0
    bmax = np.maximum.reduceat(best, starts)
    full_update_min = max(4, nblocks // 3)

    for m in range(1, count):
        b = int(np.argmax(bmax))
        gmax = float(bmax[b])
        s, e = starts_l[b], ends_l[b]
        seg = best[s:e]
        if np.count_nonzero(bmax == gmax) == 1 and np.count_nonzero(seg == gmax) == 1:
            pick_pos = s + int(np.argmax(seg))
            pick = int(orig[pick_pos])
        else:
            gather = [
                starts_l[bb] + np.flatnonzero(best[starts_l[bb]:ends_l[bb]] == gmax)
                for bb in np.flatnonzero(bmax == gmax).tolist()
            ]
            pos = np.concatenate(gather)
            cand = orig[pos]
            srt = np.argsort(cand, kind="stable")
            pos, cand = pos[srt], cand[srt]
            pick = _lex_pick(best, cand, pts, canonical)
            pick_pos = int(pos[np.flatnonzero(cand == pick)[0]])
        out[m] = pick
        c = pts[pick]
        best[pick_pos] = -1.0

        gap = np.maximum(box_lo - c, 0.0)
        np.maximum(gap, c - box_hi, out=gap)
        lb = np.einsum("ij,ij->i", gap, gap)
        active = np.flatnonzero(lb < bmax)
        if active.size >= full_update_min:
            d = p - c
            np.minimum(best, np.einsum("ij,ij->i", d, d), out=best)
            bmax = np.maximum.reduceat(best, starts)
        else:
            for bb in active.tolist():
                sb, eb = starts_l[bb], ends_l[bb]
                d = p[sb:eb] - c
                np.minimum(best[sb:eb], np.einsum("ij,ij->i", d, d), out=best[sb:eb])
                bmax[bb] = best[sb:eb].max()
            pb = block_of[pick_pos]
            bmax[pb] = best[starts_l[pb]:ends_l[pb]].max()
    return out


# ---------------------------------------------------------------------------
# k nearest neighbors
# ---------------------------------------------------------------------------


def knn(query, reference, k: int) -> NeighborIndex:
    """Exact k-nearest neighbors of each query row among the reference rows.

    Works for any common row dimension (3-D coordinates or C-D descriptors).
    Rows come back sorted by distance; exact distance ties resolve to the
    lower reference index.
    """
    q = _as_points(query, "query")
    r = _as_points(reference, "reference")
    if q.shape[1] != r.shape[1]:
        raise InvalidArgument(
            f"query dim {q.shape[1]} does not match reference dim {r.shape[1]}"
        )
    if not 1 <= k <= r.shape[0]:
        raise InvalidArgument(f"k must be in [1, {r.shape[0]}], got {k}")
    if r.shape[1] <= 3 and r.shape[0] >= _KNN_TREE_MIN:
        return _knn_tree(q, r, k)
    return _knn_dense(q, r, k)


def _order_rows(idx: IntArray, dist: FloatArray):
    """Sort each row by (distance, index): secondary sort first, then a
    stable primary sort."""
    o1 = np.argsort(idx, axis=1, kind="stable")
    idx = np.take_along_axis(idx, o1, axis=1)
    dist = np.take_along_axis(dist, o1, axis=1)
    o2 = np.argsort(dist, axis=1, kind="stable")
    return np.take_along_axis(idx, o2, axis=1), np.take_along_axis(dist, o2, axis=1)


def _select_k(d2: FloatArray, k: int):
    """Exact k smallest entries per row of a squared-distance block, with the
    lowest-index rule applied to ties that straddle the k boundary."""
    rows, refs = d2.shape
    if k == refs:
        idx = np.argsort(d2, axis=1, kind="stable").astype(np.int64)
        return idx, np.take_along_axis(d2, idx, axis=1)
    part = np.argpartition(d2, k - 1, axis=1)[:, :k].astype(np.int64)
    pd = np.take_along_axis(d2, part, axis=1)
    kv = pd.max(axis=1)
    eq_total = (d2 == kv[:, None]).sum(axis=1)
    eq_inside = (pd == kv[:, None]).sum(axis=1)
    for row in np.flatnonzero(eq_total > eq_inside):
        lt = np.flatnonzero(d2[row] < kv[row])
        eq = np.flatnonzero(d2[row] == kv[row])
        part[row] = np.concatenate([lt, eq[: k - lt.size]])
        pd[row] = d2[row, part[row]]
    return _order_rows(part, pd)


def _knn_dense(q: FloatArray, r: FloatArray, k: int) -> NeighborIndex:
    nq, d = q.shape
    nr = r.shape[0]
    if nq * nr * d <= _KNN_DENSE_BUDGET:
        d2 = ((q[:, None, :] - r[None, :, :]) ** 2).sum(axis=-1)
        idx, dist2 = _select_k(d2, k)
        return NeighborIndex(idx, np.sqrt(dist2))

    # Chunked route: select via the inner-product expansion, then recompute
    # the chosen distances directly so reported values match the definition.
    r2 = np.einsum("ij,ij->i", r, r)
    chunk = max(1, _KNN_DENSE_BUDGET // max(nr, 1))
    all_idx = np.empty((nq, k), dtype=np.int64)
    all_dist2 = np.empty((nq, k), dtype=np.float64)
    for s in range(0, nq, chunk):
        e = min(s + chunk, nq)
        qc = q[s:e]
        q2 = np.einsum("ij,ij->i", qc, qc)
        d2 = q2[:, None] + r2[None, :] - 2.0 * (qc @ r.T)
        np.maximum(d2, 0.0, out=d2)
        idx, _ = _select_k(d2, k)
        exact = ((qc[:, None, :] - r[idx]) ** 2).sum(axis=-1)
        idx, exact = _order_rows(idx, exact)
        all_idx[s:e] = idx
        all_dist2[s:e] = exact
    return NeighborIndex(all_idx, np.sqrt(all_dist2))


def _knn_tree(q: FloatArray, r: FloatArray, k: int) -> NeighborIndex:
    tree = cKDTree(r)
    dist, idx = tree.query(q, k=k, workers=-1)
    if k == 1:
        dist = dist[:, None]
        idx = idx[:, None]
    idx, dist = _order_rows(idx.astype(np.int64), dist)
    return NeighborIndex(idx, dist)


# ---------------------------------------------------------------------------
# rotations
# ---------------------------------------------------------------------------


def random_rotation(seed: int, mode: str = "so3") -> FloatArray:
    """Seeded rotation matrix; "z" fixes the z axis, "so3" is Haar-uniform
    via a normalized Gaussian quaternion."""
    rng = np.random.default_rng(seed)
    if mode == "z":
        theta = rng.uniform(0.0, 2.0 * math.pi)
        c, s = math.cos(theta), math.sin(theta)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    if mode == "so3":
        quat = rng.normal(size=4)
        quat /= np.linalg.norm(quat)
        w, x, y, z = quat
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )
    raise InvalidArgument(f"unknown rotation mode {mode!r}, expected 'z' or 'so3'")


def apply_rotation(cloud: PointCloud, rotation: FloatArray) -> PointCloud:
    """Rotate points (and normals, when present); labels are untouched."""
    r = np.asarray(rotation, dtype=np.float64)
    if r.shape != (3, 3):
        raise InvalidArgument(f"rotation must be 3 x 3, got {r.shape}")
    return PointCloud(
        points=cloud.points @ r.T,
        normals=None if cloud.normals is None else cloud.normals @ r.T,
        point_labels=cloud.point_labels,
        class_label=cloud.class_label,
    )


def seeded_rotations(seed: int, count: int, mode: str) -> list[FloatArray]:
    """One independently seeded rotation per element, stable across runs."""
    out = []
    for i in range(count):
        sub = int(np.random.SeedSequence([int(seed), i]).generate_state(1)[0])
        out.append(random_rotation(sub, mode))
    return out
