"""InfoNCE / cosine-attraction losses and their closed-form gradients.

Every gradient here is written in the tangent-projection form: the gradient
of any function of cosine similarities with respect to ``z`` lies in the
tangent space of ``z`` and carries a ``1 / |z|`` factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import ZeroVector


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 1.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")


@dataclass(frozen=True)
class PairGradient:
    grad_i: np.ndarray
    grad_j: np.ndarray
    magnitude_i: float


@dataclass(frozen=True)
class BatchGradients:
    grads: np.ndarray  # (n, d), row m is dL/dz_m
    partition_sums: np.ndarray  # S_i for each anchor


def exp_sim(a, b, cfg: LossConfig = LossConfig()) -> float:
    return float(np.exp(geo.cosine_similarity(a, b) / cfg.temperature))


def _batch(batch) -> np.ndarray:
    Z = np.asarray(batch, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] < 2:
        raise ValueError("batch must be an (n >= 2, d) array")
    return Z


def infonce_loss(batch, i: int, j: int, cfg: LossConfig = LossConfig()) -> float:
    """``-cos(z_i, z_j)/tau + log S_i`` with ``S_i`` summed over every ``k != i``.

    The positive ``j`` is part of ``S_i``.
    """
    Z = _batch(batch)
    if i == j:
        raise ValueError("anchor and positive must differ")
    U = geo.normalize_rows(Z)
    sims = U @ U[i] / cfg.temperature
    others = np.delete(sims, i)
    # log-sum-exp, shifted for stability
    m = others.max()
    log_s = m + np.log(np.sum(np.exp(others - m)))
    return float(-sims[j] + log_s)


def attractive_gradient(z_i, z_j, cfg: LossConfig = LossConfig()) -> PairGradient:
    """Gradient of ``-cos(z_i, z_j)/tau`` with respect to both points."""
    z_i = np.asarray(z_i, dtype=np.float64)
    z_j = np.asarray(z_j, dtype=np.float64)
    n_i = geo._checked_norm(z_i)
    n_j = geo._checked_norm(z_j)
    tau = cfg.temperature
    grad_i = -geo.tangent_project(z_j / n_j, z_i) / (tau * n_i)
    grad_j = -geo.tangent_project(z_i / n_i, z_j) / (tau * n_j)
    mag = np.sin(geo.angle_between(z_i, z_j)) / (tau * n_i)
    return PairGradient(grad_i, grad_j, float(mag))


def infonce_gradients(batch, i: int, j: int, cfg: LossConfig = LossConfig()) -> BatchGradients:
    """Closed-form gradient of ``infonce_loss(batch, i, j)`` for every point of the batch.

    Anchor: ``grad_A + (1/(tau|z_i|)) * sum_k (w_k zhat_k)_perp``.
    Each denominator sample ``l``: ``+(w_l / (tau |z_l|)) (zhat_i)_perp``, with
    ``w_k = ExpSim(z_i, z_k) / S_i``. The positive collects both its attraction
    and its denominator term.
    """
    Z = _batch(batch)
    if i == j:
        raise ValueError("anchor and positive must differ")
    tau = cfg.temperature
    norms = geo.row_norms(Z)
    U = geo.normalize_rows(Z)
    sims = U @ U[i] / tau
    mask = np.ones(len(Z), dtype=bool)
    mask[i] = False
    e = np.exp(sims[mask] - sims[mask].max())
    w = np.zeros(len(Z))
    w[mask] = e / e.sum()
    s_i = float(np.sum(np.exp(sims[mask])))

    grads = np.zeros_like(Z)
    pull = -U[j] + w @ U
    grads[i] = geo.tangent_project(pull, Z[i]) / (tau * norms[i])

    # d cos(z_i, z_l) / d z_l = (zhat_i)_perp / |z_l|
    coef = w.copy()
    coef[j] -= 1.0
    perp = geo.tangent_project_rows(np.broadcast_to(U[i], Z.shape), Z)
    others = coef[:, None] * perp / (tau * norms[:, None])
    grads[mask] = others[mask]
    return BatchGradients(grads, np.array([s_i]))


def grad_scale(grad, z, p: float) -> np.ndarray:
    """Multiply an upstream gradient by ``|z|**p`` (identity for ``p == 0``)."""
    grad = np.asarray(grad, dtype=np.float64)
    if p == 0:
        return grad.copy()
    return grad * geo._checked_norm(np.asarray(z, dtype=np.float64)) ** p


def grad_scale_rows(G: np.ndarray, Z: np.ndarray, p: float) -> np.ndarray:
    if p == 0:
        return G
    n = geo.row_norms(Z)
    if not np.all(n >= geo.ZERO_NORM):
        raise ZeroVector("embedding with zero norm at the gradient-scaling boundary")
    return G * (n ** p)[:, None]


# ---------------------------------------------------------------------------
# Vectorised forms used by the descent engine and the network


def attraction_gradients_rows(A: np.ndarray, B: np.ndarray, tau: float = 1.0):
    """Row-wise attraction gradients for index-aligned pairs ``(A[k], B[k])``."""
    nA = geo.row_norms(A)
    nB = geo.row_norms(B)
    UA = geo.normalize_rows(A)
    UB = geo.normalize_rows(B)
    gA = -geo.project_out_rows(UB, UA) / (tau * nA[:, None])
    gB = -geo.project_out_rows(UA, UB) / (tau * nB[:, None])
    return gA, gB


def infonce_loss_and_grad(Z: np.ndarray, anchors, positives, tau: float = 1.0,
                          reduction: str = "mean"):
    """InfoNCE summed (or averaged) over several anchors of one batch.

    For each anchor ``a`` with positive ``positives[a]``, the denominator runs
    over every other row of ``Z``. Returns ``(loss, dL/dZ)``.
    """
    Z = np.asarray(Z, dtype=np.float64)
    anchors = np.asarray(anchors)
    positives = np.asarray(positives)
    n = len(Z)
    norms = geo.row_norms(Z)
    U = geo.normalize_rows(Z)
    S = (U[anchors] @ U.T) / tau  # (m, n)
    S[np.arange(len(anchors)), anchors] = -np.inf
    mx = S.max(axis=1, keepdims=True)
    E = np.exp(S - mx)
    denom = E.sum(axis=1, keepdims=True)
    W = E / denom
    pos_sim = S[np.arange(len(anchors)), positives]
    losses = -pos_sim + (mx[:, 0] + np.log(denom[:, 0]))

    # dL/dC[a, k] = (w_ak - [k == pos(a)]) / tau
    G = W.copy()
    G[np.arange(len(anchors)), positives] -= 1.0
    G /= tau
    scale = 1.0 / len(anchors) if reduction == "mean" else 1.0
    G *= scale
    dU = np.zeros_like(Z)
    np.add.at(dU, anchors, G @ U)
    dU += G.T @ U[anchors]
    dZ = geo.project_out_rows(dU, U) / norms[:, None]
    loss = float(losses.sum() * scale)
    assert dZ.shape == (n, Z.shape[1])
    return loss, dZ


# ---------------------------------------------------------------------------
# Loop integral of the norm-scaled cosine gradient field


def _scaled_field(Z: np.ndarray, t: np.ndarray, alpha: float) -> np.ndarray:
    # grad_z cos(z, t) is minus the attraction gradient of z towards t
    g, _ = attraction_gradients_rows(Z, np.broadcast_to(t, Z.shape))
    return grad_scale_rows(-g, Z, alpha)


def potential_loop_integral(alpha: float, steps_per_segment: int = 10_000, dim: int = 2) -> float:
    """Midpoint-rule circulation of ``|z|**alpha * grad cos(z, t)`` around a closed loop.

    Loop: ``t -> 2t`` (ray), ``2t -> -2t`` (half great circle of radius 2),
    ``-2t -> -t`` (ray), ``-t -> t`` (half great circle of radius 1).
    A potential exists only if this vanishes; its exact value is ``2 - 2**(alpha+1)``.
    """
    if steps_per_segment < 1:
        raise ValueError("steps_per_segment must be positive")
    if dim < 2:
        raise ValueError("dim must be at least 2")
    t = np.zeros(dim)
    t[0] = 1.0
    u = np.zeros(dim)
    u[1] = 1.0
    mids = (np.arange(steps_per_segment) + 0.5) / steps_per_segment

    def ray(r0, r1, sign):
        r = r0 + (r1 - r0) * mids
        Z = sign * r[:, None] * t
        dz = sign * t * (r1 - r0) / steps_per_segment
        return float(np.sum(_scaled_field(Z, t, alpha) @ dz))

    def arc(radius, th0, th1):
        th = th0 + (th1 - th0) * mids
        Z = radius * (np.cos(th)[:, None] * t + np.sin(th)[:, None] * u)
        dZ = radius * (-np.sin(th)[:, None] * t + np.cos(th)[:, None] * u)
        dZ *= (th1 - th0) / steps_per_segment
        return float(np.sum(_scaled_field(Z, t, alpha) * dZ))

    return (ray(1.0, 2.0, 1.0) + arc(2.0, 0.0, np.pi)
            + ray(2.0, 1.0, -1.0) + arc(1.0, np.pi, 2 * np.pi))
