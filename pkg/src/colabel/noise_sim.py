"""Synthetic annotators: independent flipping noise and correlated (imitative,
supportive, opposite) labelers, plus grouping into annotation matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import MISSING

INDEPENDENT = ("symmetric", "pair", "classwise")
CORRELATED = ("imitative", "supportive", "opposite")
ALL = "all"


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    eps: float | None = None
    correct_classes: tuple[int, ...] = ()
    base_annotator: int | None = None

    def __post_init__(self):
        kind = self.kind.lower().replace("-", "").replace("_", "")
        object.__setattr__(self, "kind", kind)
        if kind not in INDEPENDENT + CORRELATED:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if (self.eps is not None) != (kind in ("symmetric", "pair")):
            raise ValueError(f"eps must be given exactly for symmetric/pair noise (kind={kind})")
        if self.eps is not None and not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        if (self.base_annotator is not None) != (kind in CORRELATED):
            raise ValueError(f"base_annotator must be given exactly for correlated kinds (kind={kind})")
        if bool(self.correct_classes) != (kind == "classwise"):
            raise ValueError("correct_classes must be nonempty exactly for classwise noise")
        object.__setattr__(self, "correct_classes", tuple(int(c) for c in self.correct_classes))

    @property
    def correlated(self) -> bool:
        return self.kind in CORRELATED

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        return cls(
            kind=d["kind"],
            eps=d.get("eps"),
            correct_classes=tuple(d.get("correct_classes", ())),
            base_annotator=d.get("base_annotator"),
        )

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.eps is not None:
            d["eps"] = self.eps
        if self.correct_classes:
            d["correct_classes"] = list(self.correct_classes)
        if self.base_annotator is not None:
            d["base_annotator"] = self.base_annotator
        return d


@dataclass(frozen=True)
class AnnotatorGroupSpec:
    """Ordered annotator specs; each spec is replicated ``annotators_per_spec`` times.

    ``base_annotator`` indexes the expanded annotator list, so correlated
    annotators must point to an earlier column.
    """

    specs: tuple[NoiseSpec, ...]
    labels_per_instance: int | str = ALL
    annotators_per_spec: int = 1

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        if self.annotators_per_spec < 1:
            raise ValueError("annotators_per_spec must be >= 1")
        lpi = self.labels_per_instance
        if lpi != ALL and (not isinstance(lpi, (int, np.integer)) or lpi < 1):
            raise ValueError("labels_per_instance must be a positive int or 'all'")
        for j, spec in enumerate(self.expanded()):
            if spec.correlated and not 0 <= spec.base_annotator < j:
                raise ValueError(f"annotator {j}: base annotator {spec.base_annotator} must be an earlier annotator")

    def expanded(self) -> list[NoiseSpec]:
        return [s for s in self.specs for _ in range(self.annotators_per_spec)]

    @property
    def n_annotators(self) -> int:
        return len(self.specs) * self.annotators_per_spec

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotatorGroupSpec":
        return cls(
            specs=tuple(NoiseSpec.from_dict(s) for s in d["specs"]),
            labels_per_instance=d.get("labels_per_instance", ALL),
            annotators_per_spec=d.get("annotators_per_spec", 1),
        )

    def to_dict(self) -> dict:
        return {
            "specs": [s.to_dict() for s in self.specs],
            "labels_per_instance": self.labels_per_instance,
            "annotators_per_spec": self.annotators_per_spec,
        }


def _check_classes(n_classes: int) -> None:
    if n_classes < 2:
        raise ValueError("need at least 2 classes")


def build_confusion_symmetric(n_classes: int, eps: float) -> np.ndarray:
    _check_classes(n_classes)
    Q = np.full((n_classes, n_classes), eps / (n_classes - 1))
    np.fill_diagonal(Q, 1.0 - eps)
    return Q


def build_confusion_pair(n_classes: int, eps: float) -> np.ndarray:
    """Class k flips to (k + 1) mod C with probability eps."""
    _check_classes(n_classes)
    Q = np.eye(n_classes) * (1.0 - eps)
    k = np.arange(n_classes)
    Q[k, (k + 1) % n_classes] += eps
    return Q


def build_confusion_classwise(n_classes: int, correct_classes: Sequence[int]) -> np.ndarray:
    """Identity rows on ``correct_classes``, uniform over all C classes elsewhere."""
    _check_classes(n_classes)
    correct = sorted(set(int(c) for c in correct_classes))
    if not correct:
        raise ValueError("correct_classes must be nonempty")
    if correct[0] < 0 or correct[-1] >= n_classes:
        raise ValueError("correct class index out of range")
    Q = np.full((n_classes, n_classes), 1.0 / n_classes)
    Q[correct] = np.eye(n_classes)[correct]
    return Q


def confusion_for(spec: NoiseSpec, n_classes: int) -> np.ndarray:
    if spec.kind == "symmetric":
        return build_confusion_symmetric(n_classes, spec.eps)
    if spec.kind == "pair":
        return build_confusion_pair(n_classes, spec.eps)
    if spec.kind == "classwise":
        return build_confusion_classwise(n_classes, spec.correct_classes)
    raise ValueError(f"{spec.kind} annotators have no fixed confusion matrix")


def sample_independent_labels(truth, confusion: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw each label from the confusion row of its true class."""
    truth = np.asarray(truth, dtype=int)
    cdf = np.cumsum(confusion, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(truth.shape[0])
    rows = cdf[truth]
    return (u[:, None] >= rows).sum(axis=1).astype(int)


def _random_wrong(truth: np.ndarray, n_classes: int, rng: np.random.Generator) -> np.ndarray:
    # uniform over the C-1 classes different from truth
    offset = rng.integers(1, n_classes, size=truth.shape[0])
    return (truth + offset) % n_classes


def sample_correlated_labels(truth, base_labels, kind: str, n_classes: int, rng: np.random.Generator) -> np.ndarray:
    truth = np.asarray(truth, dtype=int)
    base = np.asarray(base_labels, dtype=int)
    kind = kind.lower()
    _check_classes(n_classes)
    if np.any(base == MISSING):
        raise ValueError("correlated annotators need a fully observed base annotator")
    if kind == "imitative":
        return base.copy()
    wrong = _random_wrong(truth, n_classes, rng)
    if kind == "supportive":
        return np.where(base == truth, truth, wrong)
    if kind == "opposite":
        return np.where(base != truth, truth, wrong)
    raise ValueError(f"unknown correlated kind {kind!r}")


def generate_group(truth, spec: AnnotatorGroupSpec, n_classes: int, rng: np.random.Generator) -> np.ndarray:
    """Full (n, m) label matrix, then masked down to ``labels_per_instance`` cells per row.

    Every annotator labels every instance before masking so correlated
    annotators always see a complete base column.
    """
    truth = np.asarray(truth, dtype=int)
    n = truth.shape[0]
    annotators = spec.expanded()
    m = len(annotators)
    lpi = spec.labels_per_instance
    if lpi != ALL and lpi > m:
        raise ValueError(f"labels_per_instance={lpi} exceeds the {m} available annotators")

    full = np.empty((n, m), dtype=int)
    for j, a in enumerate(annotators):
        if a.correlated:
            full[:, j] = sample_correlated_labels(truth, full[:, a.base_annotator], a.kind, n_classes, rng)
        else:
            full[:, j] = sample_independent_labels(truth, confusion_for(a, n_classes), rng)

    if lpi == ALL or lpi == m:
        return full
    # per-row uniform choice of lpi distinct annotators
    keys = rng.random((n, m))
    chosen = np.argsort(keys, axis=1)[:, :lpi]
    mask = np.zeros((n, m), dtype=bool)
    mask[np.arange(n)[:, None], chosen] = True
    return np.where(mask, full, MISSING)


def empirical_confusion(truth, labels, n_classes: int) -> np.ndarray:
    """Row-normalized counts of (truth, observed label); missing cells skipped."""
    truth = np.asarray(truth, dtype=int)
    labels = np.asarray(labels, dtype=int)
    obs = labels != MISSING
    counts = np.zeros((n_classes, n_classes))
    np.add.at(counts, (truth[obs], labels[obs]), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def annotator_accuracy(truth, annotations: np.ndarray) -> np.ndarray:
    truth = np.asarray(truth, dtype=int)
    obs = annotations != MISSING
    hits = (annotations == truth[:, None]) & obs
    n_obs = obs.sum(axis=0)
    return np.divide(hits.sum(axis=0), n_obs, out=np.full(annotations.shape[1], np.nan), where=n_obs > 0)


# Named benchmark annotator groups (class indices 0-based).
def _sym(e):
    return NoiseSpec("symmetric", eps=e)


def _pair(e):
    return NoiseSpec("pair", eps=e)


def _cw(*c):
    return NoiseSpec("classwise", correct_classes=c)


def _cor(kind, base):
    return NoiseSpec(kind, base_annotator=base)


INDEPENDENT_GROUPS = {
    "IND-1": (_sym(0.8), _sym(0.7), _pair(0.45)),
    "IND-2": (_sym(0.85), _pair(0.45), _cw(1)),
    "IND-3": (_sym(0.8), _sym(0.7), _cw(7, 8, 9)),
    "IND-4": (_sym(0.6), _sym(0.7), _cw(3, 5, 7)),
}

CORRELATED_GROUPS = {
    "COR-1": (_sym(0.5), _sym(0.85), _cor("imitative", 0), _cor("imitative", 0), _cor("supportive", 0)),
    "COR-2": (_sym(0.8), _sym(0.45), _cor("imitative", 0), _cor("opposite", 1), _cor("supportive", 1)),
    "COR-3": (_cw(1), _sym(0.55), _cor("imitative", 1), _cor("supportive", 1), _cor("opposite", 1)),
    "COR-4": (_cw(1), _sym(0.6), _sym(0.6), _cor("supportive", 1), _cor("supportive", 2)),
}


def benchmark_group(name: str) -> AnnotatorGroupSpec:
    """IND-* groups use 10 annotators per spec and 3 labels per instance;
    COR-* groups use 5 annotators labeling everything."""
    if name in INDEPENDENT_GROUPS:
        return AnnotatorGroupSpec(INDEPENDENT_GROUPS[name], labels_per_instance=3, annotators_per_spec=10)
    if name in CORRELATED_GROUPS:
        return AnnotatorGroupSpec(CORRELATED_GROUPS[name], labels_per_instance=ALL)
    raise KeyError(name)
