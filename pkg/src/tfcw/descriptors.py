"""Surface descriptors: xyz+neighbor vectors, the geometric descriptor, and
the rotation-invariant angular descriptor, plus PCA normal estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, InvalidInput
from .geometry import NeighborIndex, PointCloud, knn

KIND_XYZ = "xyz"
KIND_GEO = "geo"
KIND_RISP = "risp"
DESCRIPTOR_KINDS = (KIND_XYZ, KIND_GEO, KIND_RISP)
DESCRIPTOR_WIDTH = {KIND_XYZ: 6, KIND_GEO: 14, KIND_RISP: 14}


@dataclass
class DescriptorField:
    """Descriptor tensor: (N, C) per point or (N, K, C) per point-neighbor.

    degenerate_count records how many angle evaluations hit a zero-length
    vector and were clamped to zero.
    """

    values: np.ndarray
    kind: str
    degenerate_count: int = 0

    @property
    def width(self) -> int:
        return self.values.shape[-1]

    @property
    def grouped(self) -> bool:
        return self.values.ndim == 3


# ---------------------------------------------------------------------------
# normal estimation
# ---------------------------------------------------------------------------


def estimate_normals(cloud: PointCloud, k_normal: int = 8):
    """Per-point unit normals from the smallest-eigenvalue direction of each
    k-neighborhood covariance.

    Sign convention: normals point away from the cloud centroid; exact ties
    fall back to positive z, then y, then x components. Rank-deficient
    neighborhoods (no well-defined tangent plane) get (0, 0, 1) and are
    flagged.

    Returns (normals, degenerate_mask).
    """
    if k_normal < 3:
        raise InvalidArgument(f"k_normal must be >= 3, got {k_normal}")
    pts = cloud.points
    n = pts.shape[0]
    k = min(k_normal, n)
    normals = np.tile(np.array([0.0, 0.0, 1.0]), (n, 1))
    if k < 3:
        return normals, np.ones(n, dtype=bool)

    nbr = pts[knn(pts, pts, k).indices]  # N x k x 3
    centered = nbr - nbr.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    evals, evecs = np.linalg.eigh(cov)
    cand = evecs[:, :, 0]

    scale = evals[:, 2]
    degenerate = (scale <= 0.0) | (evals[:, 1] <= 1e-10 * scale)

    outward = np.einsum("ij,ij->i", cand, pts - pts.mean(axis=0))
    sign = np.sign(outward)
    for axis in (2, 1, 0):  # tie-break axes in priority order
        tied = sign == 0
        if not tied.any():
            break
        sign[tied] = np.sign(cand[tied, axis])
    sign[sign == 0] = 1.0
    cand = cand * sign[:, None]

    normals[~degenerate] = cand[~degenerate]
    return normals, degenerate


# ---------------------------------------------------------------------------
# descriptor kernels (reference rows may differ from the neighbor source)
# ---------------------------------------------------------------------------


def xyz_neighbor_values(ref_points: np.ndarray, nbr_points: np.ndarray) -> np.ndarray:
    """(Q, K, 6): each neighbor's absolute position and its offset from the
    reference point."""
    offset = nbr_points - ref_points[:, None, :]
    return np.concatenate([nbr_points, offset], axis=-1)


def geo_values(ref_points: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """(Q, 14): [p, v1 x v2, v1, v2, |v1|, |v2|] with v_i the edges to the two
    nearest other points."""
    v1 = x1 - ref_points
    v2 = x2 - ref_points
    cross = np.cross(v1, v2)
    n1 = np.linalg.norm(v1, axis=1, keepdims=True)
    n2 = np.linalg.norm(v2, axis=1, keepdims=True)
    return np.concatenate([ref_points, cross, v1, v2, n1, n2], axis=1)


def _angles(u, v, nu, nv):
    dot = np.einsum("...i,...i->...", u, v)
    denom = nu * nv
    zero = denom == 0.0
    cos = np.divide(dot, denom, out=np.zeros_like(dot), where=~zero)
    np.clip(cos, -1.0, 1.0, out=cos)
    ang = np.arccos(cos)
    ang[zero] = 0.0
    return ang, int(zero.sum())


def risp_values(ref_points, ref_normals, nbr_points, nbr_normals):
    """(Q, K, 14) rotation-invariant rows: edge length and thirteen angles
    relating the two local triangle surfaces and four normals.

    Adjacency is taken in the distance-sorted neighbor order, wrapping
    cyclically at both ends. Any angle whose construction meets a zero-length
    vector is set to 0 and counted.

    Returns (values, degenerate_count).
    """
    ref = ref_points[:, None, :]
    prev_pts = np.roll(nbr_points, 1, axis=1)
    next_pts = np.roll(nbr_points, -1, axis=1)
    prev_nrm = np.roll(nbr_normals, 1, axis=1)
    next_nrm = np.roll(nbr_normals, -1, axis=1)

    v_i = ref - nbr_points        # x_i -> p
    v_m = ref - prev_pts          # x_{i-1} -> p
    v_p = ref - next_pts          # x_{i+1} -> p
    e_m = nbr_points - prev_pts   # x_{i-1} -> x_i
    e_p = nbr_points - next_pts   # x_{i+1} -> x_i
    c_p = np.cross(v_p, v_i)
    c_m = np.cross(v_m, v_i)

    def norm(a):
        return np.linalg.norm(a, axis=-1)

    n_vi, n_vm, n_vp = norm(v_i), norm(v_m), norm(v_p)
    n_em, n_ep = norm(e_m), norm(e_p)
    n_cp, n_cm = norm(c_p), norm(c_m)
    n_ref = np.broadcast_to(norm(ref_normals)[:, None], n_vi.shape)
    n_nbr = norm(nbr_normals)
    n_prev = norm(prev_nrm)
    n_next = norm(next_nrm)
    ref_n = np.broadcast_to(ref_normals[:, None, :], nbr_points.shape)

    total = 0
    parts = []
    for u, v, nu, nv in (
        (v_m, v_i, n_vm, n_vi),        # phi1
        (v_p, v_i, n_vp, n_vi),        # phi2
        (e_m, v_m, n_em, n_vm),        # phi3
        (v_p, e_p, n_vp, n_ep),        # phi4
        (c_p, c_m, n_cp, n_cm),        # phi5
        (ref_n, v_i, n_ref, n_vi),     # alpha1
        (ref_n, v_m, n_ref, n_vm),     # alpha2
        (nbr_normals, v_i, n_nbr, n_vi),   # beta1
        (nbr_normals, e_m, n_nbr, n_em),   # beta2
        (prev_nrm, v_m, n_prev, n_vm),     # theta1
        (prev_nrm, e_m, n_prev, n_em),     # theta2
        (next_nrm, e_p, n_next, n_ep),     # gamma1
        (next_nrm, v_p, n_next, n_vp),     # gamma2
    ):
        ang, z = _angles(u, v, nu, nv)
        parts.append(ang)
        total += z

    values = np.stack([n_vi] + parts, axis=-1)
    return values, total


# ---------------------------------------------------------------------------
# public per-cloud operations
# ---------------------------------------------------------------------------


def pcsd_xyz(cloud: PointCloud, neighbors: NeighborIndex) -> DescriptorField:
    """Grouped coordinate descriptor over a neighbor index built on the cloud."""
    vals = xyz_neighbor_values(cloud.points, cloud.points[neighbors.indices])
    return DescriptorField(vals, KIND_XYZ)


def pcsd_geo(cloud: PointCloud) -> DescriptorField:
    """Per-point geometric descriptor from each point's two nearest other
    points. Needs at least 3 points."""
    pts = cloud.points
    n = pts.shape[0]
    if n < 3:
        raise InvalidInput(f"geometric descriptor needs >= 3 points, got {n}")
    nn = knn(pts, pts, 3)
    not_self = nn.indices != np.arange(n)[:, None]
    # positions of the first two non-self entries, preserving distance order
    pick = np.argsort(~not_self, axis=1, kind="stable")[:, :2]
    chosen = np.take_along_axis(nn.indices, pick, axis=1)
    vals = geo_values(pts, pts[chosen[:, 0]], pts[chosen[:, 1]])
    return DescriptorField(vals, KIND_GEO)


def pcsd_risp(cloud: PointCloud, neighbors: NeighborIndex,
              k_normal: int = 8) -> DescriptorField:
    """Grouped rotation-invariant descriptor; estimates normals when the
    cloud has none."""
    if neighbors.k < 3:
        raise InvalidArgument(f"need at least 3 neighbors, got {neighbors.k}")
    if cloud.normals is not None:
        normals = cloud.normals
    else:
        normals, _ = estimate_normals(cloud, k_normal)
    vals, count = risp_values(
        cloud.points, normals,
        cloud.points[neighbors.indices], normals[neighbors.indices],
    )
    return DescriptorField(vals, KIND_RISP, degenerate_count=count)
