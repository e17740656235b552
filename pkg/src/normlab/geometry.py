"""Vector geometry on ambient space and the unit hypersphere.

All functions take 1-D float arrays. The few ``*_rows`` helpers operate on
``(n, d)`` stacks and are used by the vectorised code paths.
"""

from __future__ import annotations

import numpy as np

from .errors import ZeroVector

ZERO_NORM = 1e-300


def _as_vec(v) -> np.ndarray:
    return np.asarray(v, dtype=np.float64)


def norm(v) -> float:
    return float(np.linalg.norm(_as_vec(v)))


def _checked_norm(v: np.ndarray) -> float:
    n = float(np.linalg.norm(v))
    if not n >= ZERO_NORM:  # also catches NaN
        raise ZeroVector(f"vector norm {n!r} is below {ZERO_NORM}")
    return n


def normalize(v) -> np.ndarray:
    v = _as_vec(v)
    return v / _checked_norm(v)


def cosine_similarity(a, b) -> float:
    c = float(normalize(a) @ normalize(b))
    return min(1.0, max(-1.0, c))


def tangent_project(a, base) -> np.ndarray:
    """Component of ``a`` orthogonal to ``base``: ``(I - b b^T / |b|^2) a``."""
    a = _as_vec(a)
    b = normalize(base)
    # second pass removes the radial residue left by cancellation when a is nearly parallel to b
    out = a - (a @ b) * b
    return out - (out @ b) * b


def angle_between(a, b) -> float:
    # half-angle form; arccos of a rounded cosine loses ~1e-8 near 0 and pi
    ua, ub = normalize(a), normalize(b)
    return float(2.0 * np.arctan2(np.linalg.norm(ua - ub), np.linalg.norm(ua + ub)))


def row_norms(Z: np.ndarray) -> np.ndarray:
    return np.linalg.norm(Z, axis=1)


def normalize_rows(Z: np.ndarray) -> np.ndarray:
    n = row_norms(Z)
    if not np.all(n >= ZERO_NORM):
        bad = int(np.argmin(np.where(np.isnan(n), -1.0, n)))
        raise ZeroVector(f"row {bad} has norm {n[bad]!r}")
    return Z / n[:, None]


def tangent_project_rows(A: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Row-wise tangent projection of ``A[k]`` onto the plane orthogonal to ``base[k]``."""
    return project_out_rows(A, normalize_rows(base))


def project_out_rows(A: np.ndarray, U: np.ndarray) -> np.ndarray:
    """``A[k] - <A[k], U[k]> U[k]`` for unit rows ``U``, applied twice for full accuracy."""
    out = A - np.sum(A * U, axis=1, keepdims=True) * U
    return out - np.sum(out * U, axis=1, keepdims=True) * U
