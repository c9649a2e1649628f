"""Isotonic (pool-adjacent-violators) calibration and calibration diagnostics."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

RENORM_FLOOR = 1e-6
DEFAULT_BINS = 15
MIN_CLASS_POINTS = 10


def isotonic_fit(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted least-squares non-decreasing fit of ``y`` (already in score order)."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    # stack of blocks: (weighted mean, weight, length)
    means, weights, sizes = [], [], []
    for yi, wi in zip(y, w):
        means.append(yi)
        weights.append(wi)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, s2 = means.pop(), weights.pop(), sizes.pop()
            m1, w1, s1 = means[-1], weights[-1], sizes[-1]
            wt = w1 + w2
            means[-1] = (m1 * w1 + m2 * w2) / wt
            weights[-1] = wt
            sizes[-1] = s1 + s2
    return np.repeat(means, sizes)


@dataclass(frozen=True)
class IsotonicMap:
    """Non-decreasing step function: value[i] on [breakpoints[i], breakpoints[i+1]).

    Scores below the first breakpoint take the first value.  An empty map is
    the identity on [0, 1].
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __call__(self, scores) -> np.ndarray:
        s = np.asarray(scores, dtype=float)
        if self.breakpoints.size == 0:
            return np.clip(s, 0.0, 1.0)
        idx = np.searchsorted(self.breakpoints, s, side="right") - 1
        return self.values[np.clip(idx, 0, len(self.values) - 1)]

    @classmethod
    def identity(cls) -> "IsotonicMap":
        return cls(np.empty(0), np.empty(0))

    def is_identity(self) -> bool:
        return self.breakpoints.size == 0


def pav_fit(scores, targets, weights=None) -> IsotonicMap:
    """Fit an isotonic map of targets on scores; tied scores are pooled first."""
    s = np.asarray(scores, dtype=float)
    t = np.asarray(targets, dtype=float)
    w = np.ones_like(s) if weights is None else np.asarray(weights, dtype=float)
    if s.size == 0:
        raise ValueError("pav_fit needs at least one point")
    if not (s.shape == t.shape == w.shape):
        raise ValueError("scores, targets and weights must have equal length")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    uniq, inv = np.unique(s, return_inverse=True)
    wsum = np.bincount(inv, weights=w)
    tmean = np.bincount(inv, weights=w * t) / wsum
    fitted = isotonic_fit(tmean, wsum)
    # keep only block starts
    keep = np.concatenate([[True], fitted[1:] != fitted[:-1]])
    return IsotonicMap(uniq[keep], fitted[keep])


def apply_calibration(cmap: IsotonicMap | None, score):
    if cmap is None:
        raise ValueError("calibration map is not fitted")
    return cmap(score)


@dataclass(frozen=True)
class MulticlassCalibrator:
    maps: tuple[IsotonicMap, ...]

    @property
    def n_classes(self) -> int:
        return len(self.maps)

    def __call__(self, probs: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(np.asarray(probs, dtype=float))
        out = np.column_stack([m(P[:, k]) for k, m in enumerate(self.maps)])
        out = np.maximum(out, RENORM_FLOOR)
        return out / out.sum(axis=1, keepdims=True)


def fit_multiclass_calibrator(preds, labels, n_classes: int, min_points: int = MIN_CLASS_POINTS) -> MulticlassCalibrator:
    """One-vs-rest isotonic map per class; classes with too few trusted
    examples keep the identity map."""
    P = np.asarray(preds, dtype=float)
    y = np.asarray(labels, dtype=int)
    if P.shape[0] == 0:
        raise ValueError("no trusted predictions to calibrate on")
    maps = []
    for k in range(n_classes):
        n_k = int((y == k).sum())
        if n_k < min_points:
            # warnings dedupes repeats, so a run refitting every iteration reports once
            warnings.warn(f"class {k} has {n_k} trusted examples (< {min_points}); identity calibration", stacklevel=2)
            maps.append(IsotonicMap.identity())
            continue
        maps.append(pav_fit(P[:, k], (y == k).astype(float)))
    return MulticlassCalibrator(tuple(maps))


# --- diagnostics ---------------------------------------------------------

@dataclass
class ReliabilityReport:
    bin_lo: np.ndarray
    bin_hi: np.ndarray
    count: np.ndarray
    mean_conf: np.ndarray
    accuracy: np.ndarray
    ece: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count", "mean_conf", "accuracy"])
            for row in zip(self.bin_lo, self.bin_hi, self.count, self.mean_conf, self.accuracy):
                lo, hi, c, mc, acc = row
                w.writerow([repr(float(lo)), repr(float(hi)), int(c), _opt(mc), _opt(acc)])
            w.writerow(["ece", repr(float(self.ece)), "", "", ""])

    @classmethod
    def from_csv(cls, path) -> "ReliabilityReport":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        body, footer = rows[:-1], rows[-1]
        if footer[0] != "ece":
            raise ValueError(f"{path}: missing ece footer row")
        col = lambda i, f: np.array([f(r[i]) for r in body])  # noqa: E731
        parse = lambda v: float(v) if v else np.nan  # noqa: E731
        return cls(col(0, float), col(1, float), col(2, int), col(3, parse), col(4, parse), float(footer[1]))


def _opt(x) -> str:
    return "" if np.isnan(x) else repr(float(x))


def reliability_report(preds, labels, bins: int = DEFAULT_BINS) -> ReliabilityReport:
    """Equal-width bins over top-class confidence; bin b holds conf in (lo, hi] (0 goes to the first bin)."""
    P = np.atleast_2d(np.asarray(preds, dtype=float))
    y = np.asarray(labels, dtype=int)
    if P.shape[0] == 0:
        raise ValueError("empty evaluation set")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    conf = P.max(axis=1)
    correct = (np.argmax(P, axis=1) == y).astype(float)
    idx = np.clip(np.ceil(conf * bins).astype(int) - 1, 0, bins - 1)
    count = np.bincount(idx, minlength=bins)
    conf_sum = np.bincount(idx, weights=conf, minlength=bins)
    acc_sum = np.bincount(idx, weights=correct, minlength=bins)
    nz = count > 0
    mean_conf = np.full(bins, np.nan)
    acc = np.full(bins, np.nan)
    mean_conf[nz] = conf_sum[nz] / count[nz]
    acc[nz] = acc_sum[nz] / count[nz]
    ece = 100.0 * float(np.sum(np.abs(acc_sum[nz] - conf_sum[nz])) / P.shape[0])
    edges = np.linspace(0.0, 1.0, bins + 1)
    return ReliabilityReport(edges[:-1], edges[1:], count, mean_conf, acc, ece)


def expected_calibration_error(preds, labels, bins: int = DEFAULT_BINS) -> float:
    """ECE in percent."""
    return reliability_report(preds, labels, bins).ece
