"""Dimension-pairwise distance graphs and the pooling blocks built on them.

A point set with C descriptor channels becomes a C x C matrix of Euclidean
distances between channel rows; the per-point variant produces one such
matrix per point from its K-neighbor block.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgument, InvalidInput

VARIANTS = ("tfcw", "one_g", "no_g", "gram", "gram_minus_diag")
POOLING = ("max", "avg")

EMPOWERED_EPS = 1e-5


def pairwise_dim_distance(features, metric: str = "euclidean") -> np.ndarray:
    """Direct evaluation of the distance between every pair of feature rows.

    features: D x N, one row per dimension. Returns a symmetric D x D matrix
    with zero diagonal.
    """
    if metric != "euclidean":
        raise InvalidArgument(f"unsupported metric {metric!r}")
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise InvalidInput(f"features must be 2-D, got shape {f.shape}")
    if not np.isfinite(f).all():
        raise InvalidInput("features contain non-finite values")
    diff = f[:, None, :] - f[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def gram_form(features) -> np.ndarray:
    """Same matrix via the Gram identity: sqrt(diag(G) 1^T + 1 diag(G)^T - 2G).

    Floating-point cancellation can push arguments a hair below zero; they are
    clamped before the square root.
    """
    f = np.asarray(features, dtype=np.float64)
    g = f @ f.T
    g = (g + g.T) * 0.5
    d = np.diag(g)
    sq = d[:, None] + d[None, :] - 2.0 * g
    return np.sqrt(np.maximum(sq, 0.0))


def gram_variant(features, variant: str) -> np.ndarray:
    """The five diagonal-handling variants of the dimension graph."""
    if variant not in VARIANTS:
        raise InvalidArgument(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    f = np.asarray(features, dtype=np.float64)
    g = f @ f.T
    g = (g + g.T) * 0.5
    d = np.diag(g)
    s = d[:, None] + d[None, :]
    if variant == "tfcw":
        return np.sqrt(np.maximum(s - 2.0 * g, 0.0))
    if variant == "one_g":
        return np.sqrt(np.maximum(s - g, 0.0))
    if variant == "no_g":
        return np.sqrt(np.maximum(s, 0.0))
    if variant == "gram":
        return g
    out = g.copy()
    np.fill_diagonal(out, 0.0)
    return out


def _check_grouped(grouped) -> np.ndarray:
    x = np.asarray(grouped, dtype=np.float64)
    if x.ndim != 3:
        raise InvalidInput(f"grouped descriptors must be N x K x C, got {x.shape}")
    return x


def _apply_alpha(m: np.ndarray, alpha: float) -> np.ndarray:
    # scales rows 0..C-2 against columns 1..C-1, leaving the rest untouched
    m[..., :-1, 1:] *= alpha
    return m


def tfcw_global(grouped, alpha: float = 1.0, pool: str = "max",
                metric: str = "euclidean", variant: str = "tfcw") -> np.ndarray:
    """Whole-cloud dimension graph from an N x K x C grouped descriptor tensor.

    Pools the K axis away, then measures distances between the C channel rows
    (each an N-vector), then applies the alpha sub-block scaling.
    """
    x = _check_grouped(grouped)
    if pool not in POOLING:
        raise InvalidArgument(f"unknown pooling {pool!r}, expected one of {POOLING}")
    x = np.transpose(x, (2, 0, 1))  # C x N x K
    pooled = x.max(axis=-1) if pool == "max" else x.mean(axis=-1)
    if variant == "tfcw":
        m = pairwise_dim_distance(pooled, metric)
    else:
        m = gram_variant(pooled, variant)
    return _apply_alpha(m, alpha)


def _batched_dim_distance(x: np.ndarray, variant: str = "tfcw") -> np.ndarray:
    """Row-pair distances for a stack of matrices, x: B x C x K -> B x C x C."""
    g = x @ np.transpose(x, (0, 2, 1))
    g = (g + np.transpose(g, (0, 2, 1))) * 0.5
    d = np.diagonal(g, axis1=1, axis2=2)
    s = d[:, :, None] + d[:, None, :]
    if variant == "tfcw":
        return np.sqrt(np.maximum(s - 2.0 * g, 0.0))
    if variant == "one_g":
        return np.sqrt(np.maximum(s - g, 0.0))
    if variant == "no_g":
        return np.sqrt(np.maximum(s, 0.0))
    if variant == "gram":
        return g
    if variant == "gram_minus_diag":
        out = g.copy()
        c = out.shape[1]
        out[:, np.arange(c), np.arange(c)] = 0.0
        return out
    raise InvalidArgument(f"unknown variant {variant!r}, expected one of {VARIANTS}")


def tfcw_empowered(grouped, alpha: float = 1.0, eps: float = EMPOWERED_EPS,
                   normalize: bool = True, variant: str = "tfcw") -> np.ndarray:
    """Per-point dimension graphs: one C x C matrix per point from its K
    neighbor descriptors.

    Each K x C block is transposed to C x K; per neighbor column the values
    are divided by their sample standard deviation over the C channels plus
    eps, then row-pair distances and the alpha scaling are applied.
    `normalize=False` skips the std division (ablation toggle).
    """
    x = _check_grouped(grouped)
    n, k, c = x.shape
    if c < 2:
        raise InvalidArgument(f"need at least 2 descriptor channels, got {c}")
    x = np.transpose(x, (0, 2, 1))  # N x C x K
    if normalize:
        std = x.std(axis=1, ddof=1, keepdims=True) + eps  # over the C axis
        x = x / std
    out = _batched_dim_distance(x, variant)
    return _apply_alpha(out, alpha)


def hybrid_pool(stack) -> np.ndarray:
    """Column-wise max then column-wise mean, concatenated."""
    x = np.asarray(stack, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InvalidInput(f"stack must be a non-empty N x F matrix, got {x.shape}")
    return np.concatenate([x.max(axis=0), x.mean(axis=0)])


def united_block(grouped, alpha: float = 1.0, pool: str = "max",
                 normalize: bool = True, variant: str = "tfcw") -> np.ndarray:
    """Classification-path feature: flattened global graph concatenated with
    the hybrid-pooled per-point graphs. Length 3 * C^2."""
    x = _check_grouped(grouped)
    n, k, c = x.shape
    g = tfcw_global(x, alpha=alpha, pool=pool, variant=variant)
    e = tfcw_empowered(x, alpha=alpha, normalize=normalize, variant=variant)
    return np.concatenate([g.ravel(), hybrid_pool(e.reshape(n, c * c))])


def empowered_block(grouped, alpha: float = 1.0, normalize: bool = True,
                    variant: str = "tfcw") -> np.ndarray:
    """Segmentation-path feature: per point, the K-mean of its descriptors
    concatenated with its flattened per-point graph. Shape N x (C + C^2)."""
    x = _check_grouped(grouped)
    n, k, c = x.shape
    pooled = x.mean(axis=1)
    e = tfcw_empowered(x, alpha=alpha, normalize=normalize, variant=variant)
    return np.concatenate([pooled, e.reshape(n, c * c)], axis=1)
