"""Dataset ingestion: ASCII OFF meshes (with area-weighted surface sampling)
and the toolkit's flat binary point container."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidArgument, InvalidInput, ParseError
from .geometry import PointCloud

POINTS_MAGIC = b"TFCWPTS"
POINTS_VERSION = 1
SPLITS = ("train", "test", "val")
_LABEL_SENTINEL_U16 = 0xFFFF  # wire encoding of the reserved label -1


@dataclass
class Dataset:
    name: str
    clouds: list
    split: str = "train"
    num_classes: int = 0

    def __post_init__(self):
        if self.split not in SPLITS:
            raise InvalidArgument(f"split must be one of {SPLITS}, got {self.split!r}")
        for c in self.clouds:
            if c.class_label is not None and c.class_label >= self.num_classes:
                raise InvalidInput(
                    f"class label {c.class_label} out of range for "
                    f"{self.num_classes} classes"
                )
            if c.point_labels is not None and c.point_labels.size:
                top = int(c.point_labels.max())
                if top >= self.num_classes:
                    raise InvalidInput(
                        f"point label {top} out of range for {self.num_classes} classes"
                    )

    def __len__(self) -> int:
        return len(self.clouds)

    def class_labels(self) -> np.ndarray:
        labs = [c.class_label for c in self.clouds]
        if any(l is None for l in labs):
            raise InvalidInput(f"dataset {self.name!r} has clouds without class labels")
        return np.asarray(labs, dtype=np.int64)


# ---------------------------------------------------------------------------
# OFF meshes
# ---------------------------------------------------------------------------


def _off_lines(path: Path):
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            stripped = raw.split("#", 1)[0].strip()
            if stripped:
                yield lineno, stripped


def _parse_counts(token_line: str, path: str, lineno: int):
    parts = token_line.split()
    if len(parts) < 2:
        raise ParseError("expected vertex/face/edge counts", path=path, line=lineno)
    try:
        nv, nf = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(f"non-numeric count in {token_line!r}", path=path, line=lineno)
    if nv < 1 or nf < 0:
        raise ParseError(f"implausible counts {token_line!r}", path=path, line=lineno)
    return nv, nf


def load_off(path, sample_points: Optional[int] = None, seed: int = 0) -> PointCloud:
    """Parse an ASCII OFF file into a point cloud of its vertices.

    With sample_points set, points are drawn uniformly over the mesh surface
    (faces weighted by area, polygons fan-triangulated), seeded.
    Tolerates the common header variant with the counts fused onto the OFF
    line.
    """
    spath = str(path)
    lines = _off_lines(Path(path))
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ParseError("empty file", path=spath, line=1)

    counts: Optional[tuple] = None
    if header == "OFF":
        pass
    elif header.startswith("OFF") and header[3:].split():
        counts = _parse_counts(header[3:], spath, lineno)
    else:
        raise ParseError(f"missing OFF header, found {header!r}", path=spath, line=lineno)
    if counts is None:
        try:
            lineno, count_line = next(lines)
        except StopIteration:
            raise ParseError("missing count line", path=spath, line=lineno)
        counts = _parse_counts(count_line, spath, lineno)
    nv, nf = counts

    verts = np.empty((nv, 3))
    for i in range(nv):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nv} vertices, file ended after {i}",
                             path=spath, line=lineno)
        parts = line.split()
        if len(parts) < 3:
            raise ParseError(f"vertex needs 3 coordinates, got {line!r}",
                             path=spath, line=lineno)
        try:
            verts[i] = [float(parts[0]), float(parts[1]), float(parts[2])]
        except ValueError:
            raise ParseError(f"non-numeric vertex {line!r}", path=spath, line=lineno)

    faces = []
    for i in range(nf):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nf} faces, file ended after {i}",
                             path=spath, line=lineno)
        parts = line.split()
        try:
            m = int(parts[0])
            idx = [int(tok) for tok in parts[1:1 + m]]
        except (ValueError, IndexError):
            raise ParseError(f"malformed face {line!r}", path=spath, line=lineno)
        if len(idx) != m or m < 3:
            raise ParseError(f"face lists {len(idx)} of {m} indices",
                             path=spath, line=lineno)
        if any(j < 0 or j >= nv for j in idx):
            raise ParseError(f"face index out of range in {line!r}",
                             path=spath, line=lineno)
        for t in range(1, m - 1):  # fan triangulation
            faces.append((idx[0], idx[t], idx[t + 1]))

    if not np.isfinite(verts).all():
        raise ParseError("non-finite vertex coordinates", path=spath)
    if sample_points is None:
        return PointCloud(verts)
    return PointCloud(sample_mesh_surface(verts, np.asarray(faces, dtype=np.int64),
                                          sample_points, seed))


def sample_mesh_surface(vertices: np.ndarray, faces: np.ndarray,
                        count: int, seed: int = 0) -> np.ndarray:
    """Area-weighted uniform surface sampling over triangles."""
    if count < 1:
        raise InvalidArgument(f"count must be >= 1, got {count}")
    if faces.size == 0:
        raise InvalidInput("mesh has no faces to sample from")
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    total = areas.sum()
    if total <= 0:
        raise InvalidInput("mesh surface area is zero")
    rng = np.random.default_rng(seed)
    tri = rng.choice(len(faces), size=count, p=areas / total)
    r1 = np.sqrt(rng.uniform(size=(count, 1)))
    r2 = rng.uniform(size=(count, 1))
    return (1 - r1) * a[tri] + r1 * (1 - r2) * b[tri] + r1 * r2 * c[tri]


# ---------------------------------------------------------------------------
# flat binary container
# ---------------------------------------------------------------------------


def save_points_bin(dataset, path) -> None:
    """Write clouds to the flat container. Per-point labels must be
    non-negative except for the reserved sentinel -1."""
    clouds = dataset.clouds if isinstance(dataset, Dataset) else list(dataset)
    with open(path, "wb") as fh:
        fh.write(POINTS_MAGIC)
        fh.write(struct.pack("<II", POINTS_VERSION, len(clouds)))
        for c in clouds:
            label = -1 if c.class_label is None else int(c.class_label)
            has_pl = c.point_labels is not None
            fh.write(struct.pack("<IiB", c.n, label, 1 if has_pl else 0))
            fh.write(c.points.astype("<f4").tobytes(order="C"))
            if has_pl:
                pl = c.point_labels
                bad = (pl < 0) & (pl != -1)
                if bad.any():
                    raise InvalidInput("negative point labels other than -1 cannot be stored")
                wire = np.where(pl == -1, _LABEL_SENTINEL_U16, pl).astype("<u2")
                fh.write(wire.tobytes())


def load_points_bin(path, name: Optional[str] = None, split: str = "train",
                    num_classes: Optional[int] = None) -> Dataset:
    """Read the flat container back; num_classes defaults to the largest
    label seen plus one."""
    spath = str(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    head = len(POINTS_MAGIC) + struct.calcsize("<II")
    if len(blob) < head or blob[: len(POINTS_MAGIC)] != POINTS_MAGIC:
        raise ParseError("not a points container (bad magic)", path=spath)
    version, count = struct.unpack("<II", blob[len(POINTS_MAGIC):head])
    if version != POINTS_VERSION:
        raise ParseError(f"unsupported container version {version}", path=spath)
    off = head
    clouds = []
    rec = struct.calcsize("<IiB")
    for _ in range(count):
        if off + rec > len(blob):
            raise ParseError("truncated container (cloud header)", path=spath)
        n, label, has_pl = struct.unpack("<IiB", blob[off:off + rec])
        off += rec
        nbytes = n * 3 * 4
        if off + nbytes > len(blob):
            raise ParseError("truncated container (coordinates)", path=spath)
        pts = np.frombuffer(blob, dtype="<f4", count=n * 3, offset=off)
        pts = pts.reshape(n, 3).astype(np.float64)
        off += nbytes
        labels = None
        if has_pl:
            lbytes = n * 2
            if off + lbytes > len(blob):
                raise ParseError("truncated container (labels)", path=spath)
            wire = np.frombuffer(blob, dtype="<u2", count=n, offset=off).astype(np.int64)
            labels = np.where(wire == _LABEL_SENTINEL_U16, -1, wire)
            off += lbytes
        clouds.append(PointCloud(pts, point_labels=labels,
                                 class_label=None if label < 0 else label))
    if off != len(blob):
        raise ParseError("trailing bytes after last cloud", path=spath)
    if num_classes is None:
        num_classes = 0
        for c in clouds:
            if c.class_label is not None:
                num_classes = max(num_classes, c.class_label + 1)
            if c.point_labels is not None and c.point_labels.size:
                num_classes = max(num_classes, int(c.point_labels.max()) + 1)
    return Dataset(name=name or Path(spath).stem, clouds=clouds,
                   split=split, num_classes=num_classes)


def convert_off_tree(root, out_path, split: str = "train",
                     sample_points: int = 1024, seed: int = 0) -> Dataset:
    """Convert a class-per-directory OFF tree (root/<class>/<split>/*.off) or
    a single OFF file into the flat container."""
    root = Path(root)
    if root.is_file():
        cloud = load_off(root, sample_points=sample_points, seed=seed)
        ds = Dataset(name=root.stem, clouds=[cloud], split=split, num_classes=0)
        save_points_bin(ds, out_path)
        return ds
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise InvalidInput(f"no class directories under {root}")
    clouds = []
    for label, cdir in enumerate(class_dirs):
        files = sorted((cdir / split).glob("*.off")) if (cdir / split).is_dir() \
            else sorted(cdir.glob("*.off"))
        for i, f in enumerate(files):
            sub = int(np.random.SeedSequence([seed, label, i]).generate_state(1)[0])
            cloud = load_off(f, sample_points=sample_points, seed=sub)
            clouds.append(PointCloud(cloud.points, class_label=label))
    if not clouds:
        raise InvalidInput(f"no OFF files found under {root} for split {split!r}")
    ds = Dataset(name=root.name, clouds=clouds, split=split, num_classes=len(class_dirs))
    save_points_bin(ds, out_path)
    return ds
