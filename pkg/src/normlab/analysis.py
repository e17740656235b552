"""Post-hoc measurements on learned embeddings, all under the cosine metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import geometry as geo
from .errors import EmptyClass, TooFewPoints

_CHUNK = 1024


def _neighbor_order(Z: np.ndarray):
    """Yield ``(rows, sorted neighbour indices, sorted cosine distances)`` per chunk.

    Self is excluded; equal distances keep index order (stable sort).
    """
    U = geo.normalize_rows(np.asarray(Z, dtype=np.float64))
    n = len(U)
    for start in range(0, n, _CHUNK):
        rows = np.arange(start, min(n, start + _CHUNK))
        D = 1.0 - np.clip(U[rows] @ U.T, -1.0, 1.0)
        D[np.arange(len(rows)), rows] = np.inf
        order = np.argsort(D, axis=1, kind="stable")
        yield rows, order, np.take_along_axis(D, order, axis=1)


def knn_classify(embeddings, labels, k: int = 10):
    """Leave-one-out majority vote of the ``k`` nearest cosine neighbours.

    Returns ``(predictions, accuracy)``. Vote ties go to the smaller class id.
    """
    Z = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    if len(Z) < k + 1:
        raise TooFewPoints(f"need at least {k + 1} points for k={k}, got {len(Z)}")
    num_classes = int(labels.max()) + 1
    pred = np.empty(len(Z), dtype=np.int64)
    for rows, order, _ in _neighbor_order(Z):
        nb = labels[order[:, :k]]
        counts = np.zeros((len(rows), num_classes), dtype=np.int64)
        np.add.at(counts, (np.repeat(np.arange(len(rows)), k), nb.ravel()), 1)
        pred[rows] = np.argmax(counts, axis=1)  # first maximum = smallest id
    return pred, float(np.mean(pred == labels))


def inverse_density(embeddings, m: int = 10) -> np.ndarray:
    """Cosine distance from each point to its ``m``-th nearest neighbour."""
    Z = np.asarray(embeddings, dtype=np.float64)
    if len(Z) < m + 1:
        raise TooFewPoints(f"need at least {m + 1} points for m={m}, got {len(Z)}")
    out = np.empty(len(Z))
    for rows, _, dist in _neighbor_order(Z):
        out[rows] = np.maximum(dist[:, m - 1], 0.0)
    return out


def spearman(x, y) -> float:
    """Spearman rho with average ranks; 0 when either side has no rank variance."""
    rx = rankdata(x)
    ry = rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    den = np.sqrt(np.sum(rx * rx) * np.sum(ry * ry))
    if den == 0:
        return 0.0
    return float(np.clip(np.sum(rx * ry) / den, -1.0, 1.0))


def _snap(x: np.ndarray, digits: int = 12) -> np.ndarray:
    """Round to ``digits`` significant digits of the largest entry, so values equal
    up to rounding error share a rank."""
    top = np.max(np.abs(x))
    if top == 0 or not np.isfinite(top):
        return x
    scale = 10.0 ** (digits - 1 - np.floor(np.log10(top)))
    return np.round(x * scale) / scale


def norm_density_correlation(embeddings, m: int = 10) -> float:
    Z = np.asarray(embeddings, dtype=np.float64)
    if len(Z) < 30:
        raise TooFewPoints(f"need at least 30 points, got {len(Z)}")
    return norm_density_rho(geo.row_norms(Z), inverse_density(Z, m))


def norm_density_rho(norms, inv_density) -> float:
    """Spearman rho of precomputed norms and inverse densities."""
    return spearman(_snap(np.asarray(norms, dtype=np.float64)),
                    _snap(np.asarray(inv_density, dtype=np.float64)))


@dataclass
class BucketReport:
    buckets: list[tuple[float, float, int, float]]  # (lo, hi, count, accuracy or nan)
    min_count_threshold: int


def bucket_index(norms: np.ndarray, width: float = 0.05) -> np.ndarray:
    nb = int(round(1.0 / width))
    rel = norms / norms.max()
    return np.minimum((rel / width).astype(np.int64), nb - 1)


def bucket_accuracy(embeddings, labels, k: int = 10, threshold: int = 20,
                    predictions: np.ndarray | None = None) -> BucketReport:
    """kNN accuracy per 0.05-wide bucket of max-normalised embedding norm."""
    Z = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    if len(Z) == 0:
        raise TooFewPoints("no embeddings")
    if predictions is None:
        predictions, _ = knn_classify(Z, labels, k)
    idx = bucket_index(geo.row_norms(Z))
    correct = predictions == labels
    buckets = []
    for b in range(20):
        sel = idx == b
        count = int(sel.sum())
        acc = float(correct[sel].mean()) if count >= threshold and count > 0 else float("nan")
        buckets.append((round(0.05 * b, 10), round(0.05 * (b + 1), 10), count, acc))
    return BucketReport(buckets, threshold)


def per_class_norm_means(embeddings, labels, num_classes: int | None = None) -> np.ndarray:
    Z = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    k = int(labels.max()) + 1 if num_classes is None else num_classes
    n = geo.row_norms(Z)
    out = np.empty(k)
    for c in range(k):
        sel = labels == c
        if not np.any(sel):
            raise EmptyClass(f"class {c} has no members")
        out[c] = n[sel].mean()
    return out
