"""Two-layer ReLU encoder trained with supervised InfoNCE by plain SGD.

Forward and backward passes are written out by hand. Embeddings are the raw
network outputs; they are never normalised, since their norms are what the
experiments measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import geometry as geo
from .errors import ShapeMismatch, TrainingCollapse, ZeroVector
from .latentgen import LatentDataset, sample_positives
from .rng import make_rng
from .ssl_grads import grad_scale_rows, infonce_loss_and_grad

PARAM_NAMES = ("W1", "b1", "W2", "b2")

# stream ids under the training seed
_INIT, _SHUFFLE, _EVAL = 0, 1, 2


@dataclass
class MlpParams:
    W1: np.ndarray  # (obs_dim, hidden)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (hidden, out_dim)
    b2: np.ndarray  # (out_dim,)

    def __post_init__(self):
        if (self.W1.shape[1] != self.b1.shape[0] or self.W2.shape[0] != self.W1.shape[1]
                or self.W2.shape[1] != self.b2.shape[0]):
            raise ShapeMismatch(
                f"inconsistent shapes W1{self.W1.shape} b1{self.b1.shape} W2{self.W2.shape} b2{self.b2.shape}")

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "MlpParams":
        return MlpParams(*(getattr(self, n).copy() for n in PARAM_NAMES))


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    epochs: int = 50
    learning_rate: float = 0.01
    weight_decay: float = 0.0
    cut_constant: float = 1.0
    gradscale_p: float = 0.0
    temperature: float = 0.1
    hidden: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if not self.cut_constant > 0:
            raise ValueError("cut_constant must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


@dataclass
class EpochTrace:
    epoch: int
    mean_loss: float
    per_class_mean_norm: np.ndarray
    mean_embedding_norm: float
    extra: dict = field(default_factory=dict)


def init_params(obs_dim: int, hidden: int, out_dim: int, cut: float = 1.0, seed: int = 0) -> MlpParams:
    """Scaled-normal weights (std ``1/sqrt(fan_in)``), zero biases, then every array divided by ``cut``."""
    if not cut > 0:
        raise ValueError("cut must be positive")
    rng = make_rng(seed, _INIT)
    W1 = rng.standard_normal((obs_dim, hidden)) / np.sqrt(obs_dim)
    W2 = rng.standard_normal((hidden, out_dim)) / np.sqrt(hidden)
    p = MlpParams(W1, np.zeros(hidden), W2, np.zeros(out_dim))
    for name in PARAM_NAMES:
        setattr(p, name, getattr(p, name) / cut)
    return p


def forward(params: MlpParams, X, return_cache: bool = False):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.W1.shape[0]:
        raise ShapeMismatch(f"input shape {X.shape} does not match W1 {params.W1.shape}")
    pre = X @ params.W1 + params.b1
    H = np.maximum(pre, 0.0)
    Z = H @ params.W2 + params.b2
    if return_cache:
        return Z, (X, pre, H)
    return Z


def backward_from_embeddings(params: MlpParams, cache, dZ: np.ndarray) -> dict[str, np.ndarray]:
    X, pre, H = cache
    gW2 = H.T @ dZ
    gb2 = dZ.sum(axis=0)
    dH = dZ @ params.W2.T
    dpre = dH * (pre > 0)
    gW1 = X.T @ dpre
    gb1 = dpre.sum(axis=0)
    return {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


def batch_loss(params: MlpParams, X, anchors, positives, temperature: float = 1.0,
               weight_decay: float = 0.0) -> float:
    """Mean InfoNCE over ``anchors`` (rows of ``X``) plus the L2 penalty on every parameter."""
    Z = forward(params, X)
    loss, _ = infonce_loss_and_grad(Z, anchors, positives, temperature)
    if weight_decay:
        loss += weight_decay * sum(float(np.sum(a * a)) for a in params.arrays().values())
    return loss


def backward(params: MlpParams, X, anchors, positives, cfg: TrainConfig):
    """Loss and parameter gradients for one batch.

    With ``cfg.gradscale_p != 0`` the gradient reaching each embedding row is
    multiplied by ``|z|**p`` before the encoder backward pass; the norm is
    treated as a constant. L2 decay adds ``2 * lambda * param`` to every array.
    """
    Z, cache = forward(params, X, return_cache=True)
    loss, dZ = infonce_loss_and_grad(Z, anchors, positives, cfg.temperature)
    dZ = grad_scale_rows(dZ, Z, cfg.gradscale_p)
    grads = backward_from_embeddings(params, cache, dZ)
    if cfg.weight_decay:
        for name, arr in params.arrays().items():
            grads[name] = grads[name] + 2.0 * cfg.weight_decay * arr
            loss += cfg.weight_decay * float(np.sum(arr * arr))
    return loss, grads


def per_class_norms(Z: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    n = geo.row_norms(Z)
    out = np.full(k, np.nan)
    for c in range(k):
        sel = labels == c
        if np.any(sel):
            out[c] = n[sel].mean()
    return out


def _batch_rows(ds: LatentDataset, idx: np.ndarray, pos: np.ndarray):
    X = np.concatenate([ds.observations[idx], ds.observations[pos]])
    b = len(idx)
    return X, np.arange(b), np.arange(b, 2 * b)


class _Evaluator:
    """Fixed evaluation batches so the reported loss depends on the parameters only."""

    def __init__(self, ds: LatentDataset, cfg: TrainConfig, members):
        rng = make_rng(cfg.seed, _EVAL)
        n = len(ds.labels)
        order = np.arange(n)
        self.batches = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if len(idx) < 2:
                continue
            pos = sample_positives(ds, idx, rng, members)
            self.batches.append(_batch_rows(ds, idx, pos))
        self.ds = ds
        self.cfg = cfg

    def __call__(self, params: MlpParams, epoch: int) -> EpochTrace:
        losses = []
        for X, a, p in self.batches:
            Z = forward(params, X)
            _check_collapse(Z)
            losses.append(infonce_loss_and_grad(Z, a, p, self.cfg.temperature)[0])
        Z = forward(params, self.ds.observations)
        _check_collapse(Z)
        return EpochTrace(epoch, float(np.mean(losses)),
                          per_class_norms(Z, self.ds.labels, self.ds.num_classes),
                          float(geo.row_norms(Z).mean()))


def _check_collapse(Z: np.ndarray, threshold: float = 1e-6):
    n = geo.row_norms(Z)
    if not np.all(np.isfinite(n)):
        raise TrainingCollapse("non-finite embeddings")
    if n.mean() < threshold:
        raise TrainingCollapse(f"mean embedding norm {n.mean():.3g} below {threshold}")


def train(ds: LatentDataset, cfg: TrainConfig, params: MlpParams | None = None,
          on_epoch: Callable[[MlpParams, EpochTrace], None] | None = None):
    """SGD on supervised InfoNCE. Returns ``(params, traces)``.

    ``traces[0]`` describes the initial parameters; ``traces[e]`` the state
    after epoch ``e``. Each sample is an anchor once per epoch, paired with a
    fresh same-class positive.
    """
    members = ds.class_members()
    if params is None:
        params = init_params(ds.observations.shape[1], cfg.hidden, ds.latents.shape[1],
                             cfg.cut_constant, cfg.seed)
    else:
        params = params.copy()
    rng = make_rng(cfg.seed, _SHUFFLE)
    evaluate = _Evaluator(ds, cfg, members)
    traces = [evaluate(params, 0)]
    if on_epoch is not None:
        on_epoch(params, traces[0])
    n = len(ds.labels)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if len(idx) < 2:
                continue
            pos = sample_positives(ds, idx, rng, members)
            X, a, p = _batch_rows(ds, idx, pos)
            try:
                _, grads = backward(params, X, a, p, cfg)
            except ZeroVector as exc:
                raise TrainingCollapse(str(exc)) from exc
            if cfg.learning_rate:
                for name in PARAM_NAMES:
                    setattr(params, name, getattr(params, name) - cfg.learning_rate * grads[name])
        trace = evaluate(params, epoch)
        traces.append(trace)
        if on_epoch is not None:
            on_epoch(params, trace)
    return params, traces


# ---------------------------------------------------------------------------
# Checkpoints: one "# name rows cols" header per array followed by its rows


def save_checkpoint(params: MlpParams, path) -> None:
    path = Path(path)
    lines = []
    for name, arr in params.arrays().items():
        a2 = arr.reshape(arr.shape[0], -1) if arr.ndim == 2 else arr.reshape(1, -1)
        lines.append(f"# {name} {' '.join(str(s) for s in arr.shape)}")
        for row in a2:
            lines.append(",".join(format(float(v), ".17g") for v in row))
    path.write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> MlpParams:
    arrays: dict[str, np.ndarray] = {}
    name = shape = None
    rows: list[list[float]] = []

    def flush():
        if name is not None:
            arrays[name] = np.array(rows, dtype=np.float64).reshape(shape)

    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            flush()
            parts = line[1:].split()
            name, shape, rows = parts[0], tuple(int(s) for s in parts[1:]), []
        elif line.strip():
            rows.append([float(v) for v in line.split(",")])
    flush()
    missing = set(PARAM_NAMES) - set(arrays)
    if missing:
        raise ShapeMismatch(f"checkpoint lacks arrays {sorted(missing)}")
    return MlpParams(*(arrays[n] for n in PARAM_NAMES))
