"""Synthetic latent-class data: class centers on a sphere pushed through a random linear map."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import geometry as geo
from .rng import make_rng
from .errors import SingletonClass


@dataclass(frozen=True)
class LatentSpec:
    latent_dim: int = 10  # sphere S^d, embedded in R^(d+1)
    num_classes: int = 4
    samples: int = 4000
    spread: float = 0.1
    obs_dim: int = 64
    imbalance: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.latent_dim < 2:
            raise ValueError("latent_dim must be >= 2")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.samples < self.num_classes:
            raise ValueError("samples must be >= num_classes")
        if not self.spread > 0:
            raise ValueError("spread must be positive")
        if self.obs_dim < self.latent_dim + 1:
            raise ValueError("obs_dim must be >= latent_dim + 1")


@dataclass(frozen=True)
class LatentDataset:
    observations: np.ndarray  # (n, D)
    labels: np.ndarray  # (n,)
    latents: np.ndarray  # (n, d+1), unit norm
    generator: np.ndarray  # (d+1, D)
    class_centers: np.ndarray  # (k, d+1)

    @property
    def num_classes(self) -> int:
        return len(self.class_centers)

    def class_members(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(self.num_classes)]


def class_weights(k: int, imbalance: bool) -> np.ndarray:
    if not imbalance:
        return np.full(k, 1.0 / k)
    w = 2.0 ** -(np.arange(k) + 1.0)
    return w / w.sum()


def generate(spec: LatentSpec) -> LatentDataset:
    rng = make_rng(spec.seed)
    amb = spec.latent_dim + 1
    centers = geo.normalize_rows(rng.standard_normal((spec.num_classes, amb)))
    labels = rng.choice(spec.num_classes, size=spec.samples,
                        p=class_weights(spec.num_classes, spec.imbalance))
    noise = spec.spread * rng.standard_normal((spec.samples, amb))
    latents = geo.normalize_rows(centers[labels] + noise)
    generator = rng.standard_normal((amb, spec.obs_dim))
    return LatentDataset(latents @ generator, labels, latents, generator, centers)


def sample_positive_pair(ds: LatentDataset, rng: np.random.Generator, anchor: int | None = None,
                         members: list[np.ndarray] | None = None) -> tuple[int, int]:
    """Anchor (uniform if not given) and a different sample of the same class."""
    if anchor is None:
        anchor = int(rng.integers(len(ds.labels)))
    if members is None:
        members = ds.class_members()
    pool = members[ds.labels[anchor]]
    if len(pool) < 2:
        raise SingletonClass(f"class {ds.labels[anchor]} has a single member")
    k = int(rng.integers(len(pool) - 1))
    other = pool[k]
    if other == anchor:
        other = pool[-1]
    return anchor, int(other)


def sample_positives(ds: LatentDataset, anchors: np.ndarray, rng: np.random.Generator,
                     members: list[np.ndarray] | None = None) -> np.ndarray:
    """Vectorised ``sample_positive_pair`` for a batch of anchors."""
    if members is None:
        members = ds.class_members()
    sizes = np.array([len(m) for m in members])
    labs = ds.labels[anchors]
    if np.any(sizes[labs] < 2):
        raise SingletonClass("a class in the batch has a single member")
    # position of each anchor within its class list
    pos_in_class = np.empty(len(ds.labels), dtype=np.int64)
    for m in members:
        pos_in_class[m] = np.arange(len(m))
    draw = rng.integers(0, sizes[labs] - 1)
    draw = draw + (draw >= pos_in_class[anchors])  # skip the anchor itself
    return np.array([members[c][d] for c, d in zip(labs, draw)], dtype=np.int64)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def export_dataset(ds: LatentDataset, path) -> list[Path]:
    """Write observations (+labels) to ``path`` and centers/generator to sidecar CSVs."""
    path = Path(path)
    D = ds.observations.shape[1]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"obs_{i}" for i in range(D)])
        for lab, row in zip(ds.labels, ds.observations):
            w.writerow([int(lab)] + [_fmt(v) for v in row])
    centers_path = path.with_name(path.stem + "_centers.csv")
    gen_path = path.with_name(path.stem + "_generator.csv")
    amb = ds.class_centers.shape[1]
    with centers_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class"] + [f"c_{i}" for i in range(amb)])
        for c, row in enumerate(ds.class_centers):
            w.writerow([c] + [_fmt(v) for v in row])
    with gen_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row"] + [f"g_{i}" for i in range(D)])
        for r, row in enumerate(ds.generator):
            w.writerow([r] + [_fmt(v) for v in row])
    return [path, centers_path, gen_path]
