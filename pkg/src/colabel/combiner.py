"""Fuse data-classifier and label-aggregator distributions into co-labels.

Under conditional independence of the two views given the true class,
P(y | both) is proportional to p_d(y) * p_l(y) / q(y).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

FLOOR = 1e-12
DATA = "data_classifier"
AGGREGATOR = "label_aggregator"


@dataclass(frozen=True)
class PredictionBatch:
    rows: np.ndarray
    source: str
    calibrated: bool

    def __post_init__(self):
        if self.source not in (DATA, AGGREGATOR):
            raise ValueError(f"unknown source {self.source!r}")
        object.__setattr__(self, "rows", np.atleast_2d(np.asarray(self.rows, dtype=float)))


def combine_rows(p_d: np.ndarray, p_l: np.ndarray, prior: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rowwise fusion; returns (co-labels, degenerate-row mask).

    A row is degenerate when the two views share no class above the floor;
    such rows fall back to uniform.
    """
    p_d = np.atleast_2d(np.asarray(p_d, dtype=float))
    p_l = np.atleast_2d(np.asarray(p_l, dtype=float))
    q = np.asarray(prior, dtype=float)
    if p_d.shape != p_l.shape:
        raise ValueError(f"shape mismatch: {p_d.shape} vs {p_l.shape}")
    if np.any(q <= 0):
        raise ValueError("prior must be strictly positive")
    s = np.log(np.maximum(p_d, FLOOR)) + np.log(np.maximum(p_l, FLOOR)) - np.log(q)
    s -= s.max(axis=1, keepdims=True)
    out = np.exp(s)
    out /= out.sum(axis=1, keepdims=True)
    degenerate = ~np.any((p_d > FLOOR) & (p_l > FLOOR), axis=1)
    if degenerate.any():
        out[degenerate] = 1.0 / out.shape[1]
    return out, degenerate


def combine(p_d, p_l, prior) -> np.ndarray:
    out, bad = combine_rows(p_d, p_l, prior)
    if bad[0]:
        log.warning("combine: views are disjoint; uniform fallback")
    return out[0]


def combine_batch(batch_d: PredictionBatch, batch_l: PredictionBatch, prior, *, require_calibrated: bool = True) -> np.ndarray:
    """Co-labels from a data-classifier batch and an aggregator batch.

    The data-classifier batch must be calibrated unless ``require_calibrated``
    is switched off (used only by the calibration ablation).
    """
    if batch_d.source != DATA or batch_l.source != AGGREGATOR:
        raise ValueError("combine_batch expects (data classifier, label aggregator) batches")
    if require_calibrated and not batch_d.calibrated:
        raise ValueError("data-classifier predictions must be calibrated before combination")
    if batch_d.rows.shape[0] != batch_l.rows.shape[0]:
        raise ValueError("prediction batches differ in row count")
    out, bad = combine_rows(batch_d.rows, batch_l.rows, prior)
    if bad.any():
        log.warning("combine: %d rows with disjoint views; uniform fallback", int(bad.sum()))
    return out
