"""Gaussian-blob datasets with simulated annotator groups."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import LoadedData, TrustedDataset, UntrustedDataset, derive_rng
from .noise_sim import AnnotatorGroupSpec, NoiseSpec, generate_group


def _default_group() -> AnnotatorGroupSpec:
    return AnnotatorGroupSpec(
        (NoiseSpec("symmetric", eps=0.6), NoiseSpec("symmetric", eps=0.7), NoiseSpec("classwise", correct_classes=(0,))),
        labels_per_instance=3,
    )


@dataclass
class SimulationConfig:
    n_classes: int = 3
    dim: int = 2
    n_untrusted: int = 3000
    n_trusted: int = 150
    n_validation: int = 1000
    separation: float = 4.0
    std: float = 1.0
    clusters_per_class: int = 1
    annotators: AnnotatorGroupSpec = field(default_factory=_default_group)
    trusted_annotations: bool = True

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        d = dict(d)
        if "annotators" in d and isinstance(d["annotators"], dict):
            d["annotators"] = AnnotatorGroupSpec.from_dict(d["annotators"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["annotators"] = self.annotators.to_dict()
        return d


def blob_centers(n_classes: int, dim: int, separation: float) -> np.ndarray:
    """Class means with nearest-neighbour distance ``separation``.

    Regular simplex corners when dim >= n_classes, else a regular polygon in
    the first two coordinates.
    """
    if dim >= n_classes:
        return np.eye(n_classes, dim) * separation / np.sqrt(2.0)
    if dim < 2:
        return (np.arange(n_classes) * separation)[:, None]
    angle = 2 * np.pi * np.arange(n_classes) / n_classes
    radius = separation / (2 * np.sin(np.pi / n_classes))
    centers = np.zeros((n_classes, dim))
    centers[:, 0] = radius * np.cos(angle)
    centers[:, 1] = radius * np.sin(angle)
    return centers


def grid_centers(n_classes: int, dim: int, separation: float, clusters_per_class: int) -> np.ndarray:
    """(C, K, dim) cluster means on a square grid with spacing ``separation``.

    Cell r is assigned to class r mod C in row-major order, so neighbouring
    cells mostly belong to different classes.
    """
    if dim < 2:
        raise ValueError("clustered blobs need dim >= 2")
    n_cells = n_classes * clusters_per_class
    side = int(np.ceil(np.sqrt(n_cells)))
    if side % n_classes == 0:
        side += 1  # avoid whole columns of one class
    centers = np.zeros((n_classes, clusters_per_class, dim))
    for r in range(n_cells):
        row, col = divmod(r, side)
        centers[r % n_classes, r // n_classes, :2] = separation * np.array([col, row], dtype=float)
    return centers - centers.reshape(-1, dim).mean(axis=0)


def sample_blobs(labels: np.ndarray, centers: np.ndarray, std: float, rng: np.random.Generator) -> np.ndarray:
    """Isotropic Gaussian around the class mean, or around a uniformly chosen
    cluster mean when ``centers`` is (C, K, dim)."""
    if centers.ndim == 3:
        which = rng.integers(0, centers.shape[1], size=labels.shape[0])
        means = centers[labels, which]
    else:
        means = centers[labels]
    return means + std * rng.standard_normal((labels.shape[0], centers.shape[-1]))


def balanced_labels(n: int, n_classes: int, rng: np.random.Generator) -> np.ndarray:
    labels = np.arange(n) % n_classes
    return rng.permutation(labels)


def simulate(cfg: SimulationConfig, seed: int) -> LoadedData:
    """Untrusted (with hidden truth), balanced trusted, and validation splits."""
    C = cfg.n_classes
    if cfg.clusters_per_class > 1:
        centers = grid_centers(C, cfg.dim, cfg.separation, cfg.clusters_per_class)
    else:
        centers = blob_centers(C, cfg.dim, cfg.separation)

    def split(name: str, n: int, balanced: bool):
        rng = derive_rng(seed, "simulate", name)
        y = balanced_labels(n, C, rng) if balanced else rng.integers(0, C, size=n)
        X = sample_blobs(y, centers, cfg.std, rng)
        A = generate_group(y, cfg.annotators, C, derive_rng(seed, "annotate", name))
        ids = [f"{name[0]}{i:06d}" for i in range(n)]
        return ids, X, y, A

    uid, UX, Uy, UA = split("untrusted", cfg.n_untrusted, False)
    tid, TX, Ty, TA = split("trusted", cfg.n_trusted, True)
    untrusted = UntrustedDataset(uid, UX, UA, Uy)
    trusted = TrustedDataset(tid, TX, Ty, TA if cfg.trusted_annotations else None)
    validation = None
    if cfg.n_validation > 0:
        vid, VX, Vy, VA = split("validation", cfg.n_validation, False)
        validation = UntrustedDataset(vid, VX, VA, Vy)
    return LoadedData(untrusted, trusted, validation, extra={"centers": centers})
