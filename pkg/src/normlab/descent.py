"""Gradient descent directly on embeddings (no network).

Two index-aligned sets ``A`` and ``B`` hold positive pairs ``(A[k], B[k])``.
Every point is moved by its analytic cosine/InfoNCE gradient, optionally
rescaled by ``|z|**p`` and followed by a multiplicative weight-decay shrink.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import geometry as geo
from .errors import CollapseDetected, InvalidEpsilon, UnequalNorms
from .rng import make_rng
from .ssl_grads import attraction_gradients_rows, grad_scale_rows, infonce_loss_and_grad


@dataclass
class EmbeddingSet:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        self.B = np.asarray(self.B, dtype=np.float64)
        if self.A.shape != self.B.shape or self.A.ndim != 2:
            raise ValueError(f"sets must be equal-shape (n, d) arrays, got {self.A.shape} and {self.B.shape}")

    @property
    def num_pairs(self) -> int:
        return len(self.A)

    def pair_cosines(self) -> np.ndarray:
        return np.clip(np.sum(geo.normalize_rows(self.A) * geo.normalize_rows(self.B), axis=1), -1.0, 1.0)

    def mean_norm(self) -> float:
        return float(np.mean(np.concatenate([geo.row_norms(self.A), geo.row_norms(self.B)])))

    def copy(self) -> "EmbeddingSet":
        return EmbeddingSet(self.A.copy(), self.B.copy())


@dataclass(frozen=True)
class PairInitSpec:
    dimension: int = 20
    num_pairs: int = 500
    target_norm: float = 1.0
    angle_alpha: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")
        if self.num_pairs < 1:
            raise ValueError("num_pairs must be >= 1")
        if not self.target_norm > 0:
            raise ValueError("target_norm must be positive")
        if not -1.0 <= self.angle_alpha <= 1.0:
            raise ValueError("angle_alpha must lie in [-1, 1]")


@dataclass(frozen=True)
class DescentConfig:
    learning_rate: float = 0.01
    weight_decay: float = 0.0
    gradscale_p: float = 0.0
    temperature: float = 1.0
    max_steps: int = 100_000
    converge_threshold: float = 0.999
    collapse_threshold: float = 1e-2
    mode: Literal["attraction_only", "infonce"] = "attraction_only"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 0 < self.converge_threshold < 1:
            raise ValueError("converge_threshold must lie in (0, 1)")
        if self.mode not in ("attraction_only", "infonce"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class ConvergenceResult:
    outcome: Literal["converged", "collapsed", "exhausted"]
    steps: int
    final_mean_cos: float
    norm_trace: list[tuple[int, float]] = field(default_factory=list)


def init_pairs(spec: PairInitSpec) -> EmbeddingSet:
    """Random unit pairs with controlled angle, then both sets rescaled to ``target_norm``.

    ``B`` is interpolated as ``b * (1 - |alpha|) + a * alpha``: ``alpha = 1`` copies
    its partner, ``alpha = -1`` places it antipodally.
    """
    rng = make_rng(spec.seed)
    shape = (spec.num_pairs, spec.dimension)
    A = geo.normalize_rows(rng.standard_normal(shape))
    B = geo.normalize_rows(rng.standard_normal(shape))
    a = spec.angle_alpha
    B = B * (1.0 - abs(a)) + A * a
    return EmbeddingSet(spec.target_norm * A,
                        spec.target_norm * geo.normalize_rows(B))


def gradients(s: EmbeddingSet, cfg: DescentConfig):
    """Loss gradients ``(dL/dA, dL/dB)`` for every point, before any gradient scaling."""
    if cfg.mode == "attraction_only":
        return attraction_gradients_rows(s.A, s.B, cfg.temperature)
    # anchor A[i], positive B[i]; the denominator of anchor i is A \ {A[i]} plus B[i]
    if s.num_pairs == 1:
        return attraction_gradients_rows(s.A, s.B, cfg.temperature)
    UA = geo.normalize_rows(s.A)
    UB = geo.normalize_rows(s.B)
    tau = cfg.temperature
    simAA = UA @ UA.T / tau
    np.fill_diagonal(simAA, -np.inf)
    simAB = np.sum(UA * UB, axis=1) / tau
    mx = np.maximum(simAA.max(axis=1), simAB)
    EAA = np.exp(simAA - mx[:, None])
    EAB = np.exp(simAB - mx)
    denom = EAA.sum(axis=1) + EAB
    WAA = EAA / denom[:, None]
    wAB = EAB / denom
    # dL/dcos for the (anchor i, k) entries, already divided by tau
    GAA = WAA / tau
    gAB = (wAB - 1.0) / tau
    dUA = GAA @ UA + gAB[:, None] * UB + GAA.T @ UA
    dUB = gAB[:, None] * UA
    nA = geo.row_norms(s.A)
    nB = geo.row_norms(s.B)
    gA = geo.project_out_rows(dUA, UA) / nA[:, None]
    gB = geo.project_out_rows(dUB, UB) / nB[:, None]
    return gA, gB


def infonce_set_loss(s: EmbeddingSet, temperature: float = 1.0) -> float:
    """Summed InfoNCE over anchors ``A[i]`` with batch ``A`` plus ``B[i]`` (reference path)."""
    total = 0.0
    n = s.num_pairs
    for i in range(n):
        Z = np.vstack([s.A, s.B[i:i + 1]])
        loss, _ = infonce_loss_and_grad(Z, [i], [n], temperature, reduction="sum")
        total += loss
    return total


def descent_step(s: EmbeddingSet, cfg: DescentConfig) -> EmbeddingSet:
    """One gradient step on every point, then the weight-decay shrink."""
    gA, gB = gradients(s, cfg)
    gA = grad_scale_rows(gA, s.A, cfg.gradscale_p)
    gB = grad_scale_rows(gB, s.B, cfg.gradscale_p)
    A = s.A - cfg.learning_rate * gA
    B = s.B - cfg.learning_rate * gB
    if cfg.weight_decay > 0:
        shrink = 1.0 - 2.0 * cfg.learning_rate * cfg.weight_decay
        if shrink <= 0:
            raise CollapseDetected(f"weight-decay shrink factor {shrink} is not positive")
        A *= shrink
        B *= shrink
    norms = np.concatenate([geo.row_norms(A), geo.row_norms(B)])
    if not np.all(np.isfinite(norms)):
        raise CollapseDetected("non-finite embedding after step")
    if norms.mean() < cfg.collapse_threshold:
        raise CollapseDetected(f"mean embedding norm {norms.mean():.3g} below {cfg.collapse_threshold}")
    return EmbeddingSet(A, B)


def _mean_cos(s: EmbeddingSet) -> float:
    return float(np.mean(s.pair_cosines()))


def run_set(s: EmbeddingSet, cfg: DescentConfig, on_step=None) -> ConvergenceResult:
    """Iterate ``descent_step`` from a given set until converged, collapsed or exhausted."""
    trace = [(0, s.mean_norm())]
    mean_cos = _mean_cos(s)
    if on_step is not None:
        on_step(0, s)
    if mean_cos >= cfg.converge_threshold:
        return ConvergenceResult("converged", 0, mean_cos, trace)
    for step in range(1, cfg.max_steps + 1):
        try:
            s = descent_step(s, cfg)
        except CollapseDetected:
            return ConvergenceResult("collapsed", step, mean_cos, trace)
        trace.append((step, s.mean_norm()))
        mean_cos = _mean_cos(s)
        if on_step is not None:
            on_step(step, s)
        if mean_cos >= cfg.converge_threshold:
            return ConvergenceResult("converged", step, mean_cos, trace)
    return ConvergenceResult("exhausted", cfg.max_steps, mean_cos, trace)


def run_to_convergence(spec: PairInitSpec, cfg: DescentConfig, on_step=None) -> ConvergenceResult:
    return run_set(init_pairs(spec), cfg, on_step)


def theorem_bound_check(z_i, z_j, lr: float) -> tuple[float, float]:
    """Symmetric cosine-gradient step on an equal-norm pair.

    Returns ``(actual change in cosine, 2 * lr * sin^2(phi) / rho^2)``. The
    bound is only guaranteed when the pair is not obtuse; see the README.
    """
    z_i = np.asarray(z_i, dtype=np.float64)
    z_j = np.asarray(z_j, dtype=np.float64)
    r_i, r_j = geo.norm(z_i), geo.norm(z_j)
    if abs(r_i - r_j) > 1e-9 * max(r_i, r_j):
        raise UnequalNorms(f"norms differ: {r_i} vs {r_j}")
    gi, gj = attraction_gradients_rows(z_i[None], z_j[None])
    zi2 = z_i - lr * gi[0]
    zj2 = z_j - lr * gj[0]
    c0 = geo.cosine_similarity(z_i, z_j)
    c1 = geo.cosine_similarity(zi2, zj2)
    bound = 2.0 * lr * max(0.0, 1.0 - c0 * c0) / (r_i * r_i)
    return c1 - c0, bound


def opposite_halves_rate(s: EmbeddingSet) -> float:
    """Fraction of positive pairs whose angle exceeds pi/2."""
    if s.num_pairs == 0:
        raise ValueError("empty embedding set")
    return float(np.mean(s.pair_cosines() < 0.0))


def chebyshev_opposite_bound(d: int, eps: float) -> float:
    """Upper bound ``1 / (2 d (1 - eps)^2)`` on P[cos >= 1 - eps] for Gaussian pairs."""
    if not 0 < eps < 1:
        raise InvalidEpsilon(f"eps must lie in (0, 1), got {eps}")
    if d < 1:
        raise ValueError("d must be >= 1")
    return 1.0 / (2.0 * d * (1.0 - eps) ** 2)


def empirical_cosine_tail(d: int, eps: float, trials: int, rng: np.random.Generator,
                          chunk: int = 20_000) -> float:
    """Monte Carlo estimate of P[cos(x, y) >= 1 - eps] for i.i.d. standard-normal pairs."""
    hits = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        x = rng.standard_normal((m, d))
        y = rng.standard_normal((m, d))
        c = np.sum(x * y, axis=1) / (np.linalg.norm(x, axis=1) * np.linalg.norm(y, axis=1))
        hits += int(np.sum(c >= 1.0 - eps))
        done += m
    return hits / trials
