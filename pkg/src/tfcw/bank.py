"""Similarity memory bank: build, predict, metrics, gamma sweep, and the
binary bank container."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument, InvalidInput, ParseError

BANK_MAGIC = b"TFCWBANK"
BANK_VERSION = 1
DEFAULT_GAMMA = 100.0
DEFAULT_GAMMA_GRID = (1.0, 10.0, 100.0, 1000.0)

_PREDICT_CHUNK_BUDGET = 8_000_000  # entries of the similarity block held at once


def _normalize_rows(x: np.ndarray, reject_zero: bool = False) -> np.ndarray:
    """Unit-normalize rows. Rows whose norm is already 1 within 1e-12 are
    passed through bit-identically; zero rows either raise or stay zero."""
    norms = np.linalg.norm(x, axis=1)
    if reject_zero and np.any(norms == 0):
        raise InvalidInput("zero-norm feature row cannot be stored in a bank")
    safe = np.where(norms == 0, 1.0, norms)
    safe = np.where(np.abs(safe - 1.0) <= 1e-12, 1.0, safe)
    return x / safe[:, None]


@dataclass
class MemoryBank:
    """Unit-norm feature rows, one-hot labels, and the similarity sharpness."""

    features: np.ndarray
    labels_onehot: np.ndarray
    gamma: float

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def num_classes(self) -> int:
        return self.labels_onehot.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return self.labels_onehot.argmax(axis=1)


def build_bank(features, labels, num_classes: int, gamma: float = DEFAULT_GAMMA) -> MemoryBank:
    feats = np.asarray(features, dtype=np.float64)
    labs = np.asarray(labels, dtype=np.int64)
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise InvalidInput(f"features must be a non-empty M x F matrix, got {feats.shape}")
    if labs.shape != (feats.shape[0],):
        raise InvalidInput("labels must be one integer per feature row")
    if labs.min() < 0 or labs.max() >= num_classes:
        raise InvalidInput(f"labels must lie in [0, {num_classes})")
    if gamma <= 0:
        raise InvalidArgument(f"gamma must be positive, got {gamma}")
    onehot = np.zeros((feats.shape[0], num_classes), dtype=np.float64)
    onehot[np.arange(feats.shape[0]), labs] = 1.0
    return MemoryBank(_normalize_rows(feats, reject_zero=True), onehot, float(gamma))


def _logits(bank: MemoryBank, test: np.ndarray, gamma: Optional[float] = None) -> np.ndarray:
    gamma = bank.gamma if gamma is None else gamma
    t = bank.size
    out = np.empty((test.shape[0], bank.num_classes))
    chunk = max(1, _PREDICT_CHUNK_BUDGET // max(t, 1))
    for s in range(0, test.shape[0], chunk):
        e = min(s + chunk, test.shape[0])
        sim = test[s:e] @ bank.features.T
        act = np.exp(-gamma * (1.0 - sim))
        out[s:e] = act @ bank.labels_onehot
    return out


def predict(bank: MemoryBank, test_features):
    """Activation-weighted label aggregation over cosine similarities.

    Returns (logits, labels); label ties resolve to the lowest class index.
    """
    test = np.asarray(test_features, dtype=np.float64)
    if test.ndim != 2 or test.shape[1] != bank.features.shape[1]:
        raise InvalidArgument(
            f"test features must be T x {bank.features.shape[1]}, got {test.shape}"
        )
    test = _normalize_rows(test)
    logits = _logits(bank, test)
    return logits, logits.argmax(axis=1)


def predict_pointwise(bank: MemoryBank, per_point_features) -> np.ndarray:
    """Row-wise prediction for segmentation; labels only."""
    _, labels = predict(bank, per_point_features)
    return labels


@dataclass
class Metrics:
    overall_accuracy: float
    per_class_accuracy: np.ndarray
    miou: Optional[float] = None


def _per_class(pred: np.ndarray, truth: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.ones(num_classes)
    for c in range(num_classes):
        mask = truth == c
        if mask.any():
            out[c] = float((pred[mask] == c).mean())
    return out


def _shape_miou(pred: np.ndarray, truth: np.ndarray) -> float:
    parts = np.union1d(np.unique(pred), np.unique(truth))
    ious = []
    for p in parts:
        inter = np.logical_and(pred == p, truth == p).sum()
        union = np.logical_or(pred == p, truth == p).sum()
        ious.append(inter / union)
    return float(np.mean(ious))


def compute_metrics(pred, truth, task: str = "classification",
                    num_classes: Optional[int] = None) -> Metrics:
    """Overall accuracy plus per-class accuracy; part segmentation adds the
    mean per-shape IoU, averaging each shape over the parts present in its
    prediction or ground truth.

    For classification, pred/truth are flat label arrays. For segmentation
    they are sequences of per-shape label arrays of equal length.
    """
    if task == "classification":
        p = np.asarray(pred, dtype=np.int64)
        t = np.asarray(truth, dtype=np.int64)
        if p.shape != t.shape:
            raise InvalidArgument("pred and truth must have equal lengths")
        nc = int(max(p.max(), t.max())) + 1 if num_classes is None else num_classes
        if p.min() < 0 or t.min() < 0 or p.max() >= nc or t.max() >= nc:
            raise InvalidArgument(f"labels out of range [0, {nc})")
        return Metrics(float((p == t).mean()), _per_class(p, t, nc))
    if task == "part_segmentation":
        if len(pred) != len(truth):
            raise InvalidArgument("pred and truth must cover the same shapes")
        shapes_p = [np.asarray(a, dtype=np.int64) for a in pred]
        shapes_t = [np.asarray(a, dtype=np.int64) for a in truth]
        flat_p = np.concatenate(shapes_p)
        flat_t = np.concatenate(shapes_t)
        nc = int(max(flat_p.max(), flat_t.max())) + 1 if num_classes is None else num_classes
        if flat_p.min() < 0 or flat_t.min() < 0 or flat_p.max() >= nc or flat_t.max() >= nc:
            raise InvalidArgument(f"labels out of range [0, {nc})")
        miou = float(np.mean([_shape_miou(p, t) for p, t in zip(shapes_p, shapes_t)]))
        return Metrics(float((flat_p == flat_t).mean()), _per_class(flat_p, flat_t, nc), miou)
    raise InvalidArgument(f"unknown task {task!r}")


def sweep_gamma(bank_features, bank_labels, val_features, val_labels,
                grid: Sequence[float] = DEFAULT_GAMMA_GRID) -> float:
    """Grid value maximizing validation accuracy; ties go to the smallest
    gamma. The similarity matrix is computed once and reused."""
    grid = [float(g) for g in grid]
    if not grid:
        raise InvalidArgument("gamma grid is empty")
    if any(g <= 0 for g in grid):
        raise InvalidArgument("gamma grid values must be positive")
    labs = np.asarray(val_labels, dtype=np.int64)
    num_classes = int(max(np.max(bank_labels), labs.max())) + 1
    bank = build_bank(bank_features, bank_labels, num_classes, gamma=grid[0])
    val = _normalize_rows(np.asarray(val_features, dtype=np.float64))
    best_gamma, best_acc = None, -1.0
    for g in sorted(grid):
        pred = _logits(bank, val, gamma=g).argmax(axis=1)
        acc = float((pred == labs).mean())
        if acc > best_acc:
            best_gamma, best_acc = g, acc
    return best_gamma


# ---------------------------------------------------------------------------
# binary container
# ---------------------------------------------------------------------------


def save_bank(bank: MemoryBank, path) -> None:
    """Little-endian container: magic, u32 version, u32 M/F/L, f64 gamma,
    float32 features row-major, u16 labels."""
    m, f = bank.features.shape
    header = BANK_MAGIC + struct.pack(
        "<IIIId", BANK_VERSION, m, f, bank.num_classes, bank.gamma
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(bank.features.astype("<f4").tobytes(order="C"))
        fh.write(bank.labels.astype("<u2").tobytes())


def load_bank(path) -> MemoryBank:
    with open(path, "rb") as fh:
        blob = fh.read()
    head = len(BANK_MAGIC) + struct.calcsize("<IIIId")
    if len(blob) < head or blob[: len(BANK_MAGIC)] != BANK_MAGIC:
        raise ParseError("not a bank container (bad magic)", path=str(path))
    version, m, f, l, gamma = struct.unpack("<IIIId", blob[len(BANK_MAGIC):head])
    if version != BANK_VERSION:
        raise ParseError(f"unsupported bank version {version}", path=str(path))
    need = head + m * f * 4 + m * 2
    if len(blob) != need:
        raise ParseError(
            f"truncated bank container: expected {need} bytes, got {len(blob)}",
            path=str(path),
        )
    feats = np.frombuffer(blob, dtype="<f4", count=m * f, offset=head)
    feats = feats.reshape(m, f).astype(np.float64)
    labels = np.frombuffer(blob, dtype="<u2", count=m, offset=head + m * f * 4)
    onehot = np.zeros((m, l), dtype=np.float64)
    onehot[np.arange(m), labels.astype(np.int64)] = 1.0
    return MemoryBank(feats, onehot, float(gamma))
