"""Alternating co-label training (sparse NB aggregator and complete-data neural
aggregator variants), the retraining stage, and majority-vote baselines."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import aggregator as agg
from .calibration import (
    DEFAULT_BINS,
    MIN_CLASS_POINTS,
    MulticlassCalibrator,
    expected_calibration_error,
    fit_multiclass_calibrator,
    reliability_report,
)
from .classifier import MLP, OptimizerConfig, accuracy, fine_tune, init_mlp, predict_proba, train_epochs
from .combiner import AGGREGATOR, DATA, PredictionBatch, combine_batch
from .core import (
    MISSING,
    TrustedDataset,
    UntrustedDataset,
    check_soft_labels,
    derive_rng,
    estimate_class_prior,
    one_hot,
)

log = logging.getLogger(__name__)

VARIANTS = ("tcl", "tcls", "dl-mv")
RETRAIN_MODES = ("full", "noisy-only", "none")
INIT_MODES = ("mv", "trusted-nb")


def _default_agg_opt() -> OptimizerConfig:
    return OptimizerConfig(lr=1e-3, momentum=0.0, weight_decay=0.0, batch_size=128, epochs=3, method="adam")


def _default_finetune_opt() -> OptimizerConfig:
    return OptimizerConfig(lr=0.01, momentum=0.9, weight_decay=5e-4, batch_size=32, epochs=20)


@dataclass
class TrainConfig:
    variant: str = "tcl"
    iterations: int = 10
    n_classes: int | None = None
    classifier_hidden: tuple[int, ...] = (32,)
    classifier_opt: OptimizerConfig = field(default_factory=OptimizerConfig)
    aggregator_hidden: tuple[int, ...] = (64, 32)
    aggregator_opt: OptimizerConfig = field(default_factory=_default_agg_opt)
    epochs_first: int = 1
    epochs_per_iter: int = 1
    retrain_epochs: int = 30
    retrain: str = "full"
    trusted_weight: float = 1.0
    calibrate: bool = True
    calibrate_aggregator: bool | None = None  # None: off for tcl, on for tcls
    colabel_init: str | None = None  # None: mv for tcl, trusted-nb for tcls
    ece_bins: int = DEFAULT_BINS
    prior_alpha: float = 1.0
    confusion_alpha: float = 0.01
    min_class_points: int = MIN_CLASS_POINTS
    finetune: bool = False
    finetune_opt: OptimizerConfig = field(default_factory=_default_finetune_opt)
    baseline_epochs: int | None = None  # None: alternation epochs + retrain epochs
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.epochs_first < 0 or self.epochs_per_iter < 0 or self.retrain_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.retrain not in RETRAIN_MODES:
            raise ValueError(f"retrain must be one of {RETRAIN_MODES}")
        if self.colabel_init is not None and self.colabel_init not in INIT_MODES:
            raise ValueError(f"colabel_init must be one of {INIT_MODES}")
        self.classifier_hidden = tuple(self.classifier_hidden)
        self.aggregator_hidden = tuple(self.aggregator_hidden)

    @property
    def init_mode(self) -> str:
        if self.colabel_init is not None:
            return self.colabel_init
        return "trusted-nb" if self.variant == "tcls" else "mv"

    @property
    def calibrates_aggregator(self) -> bool:
        if self.calibrate_aggregator is not None:
            return self.calibrate_aggregator
        return self.variant == "tcls"

    def epochs_at(self, t: int) -> int:
        return self.epochs_first if t == 0 else self.epochs_per_iter

    def alternation_epochs(self) -> int:
        return sum(self.epochs_at(t) for t in range(self.iterations))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        for key in ("classifier_opt", "aggregator_opt", "finetune_opt"):
            if key in d and isinstance(d[key], dict):
                base = getattr(cls(), key)
                d[key] = base.replace(**d[key])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


METRIC_COLUMNS = ("iter", "colabel_acc", "clf_val_acc", "agg_val_acc", "ece_pre", "ece_post", "clf_loss", "agg_loss")


@dataclass
class IterationRecord:
    iter: int
    colabel_acc: float = math.nan
    clf_val_acc: float = math.nan
    agg_val_acc: float = math.nan
    ece_pre: float = math.nan
    ece_post: float = math.nan
    clf_loss: float = math.nan
    agg_loss: float = math.nan
    updates: int = 0


@dataclass
class TrainHistory:
    records: list[IterationRecord] = field(default_factory=list)
    colabel_updates: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRIC_COLUMNS)
            for r in self.records:
                w.writerow([r.iter] + [_fmt(getattr(r, c)) for c in METRIC_COLUMNS[1:]])

    @classmethod
    def from_csv(cls, path) -> "TrainHistory":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        recs = [
            IterationRecord(int(r["iter"]), **{c: float(r[c]) if r[c] else math.nan for c in METRIC_COLUMNS[1:]})
            for r in rows
        ]
        return cls(recs)


def _fmt(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


@dataclass
class TrainResult:
    classifier: MLP
    history: TrainHistory
    colabels: np.ndarray
    prior: np.ndarray
    pre_retrain: MLP | None = None
    confusions: np.ndarray | None = None
    aggregator: MLP | None = None
    calibrator: MulticlassCalibrator | None = None


def _n_classes(untrusted: UntrustedDataset, trusted: TrustedDataset, config: TrainConfig) -> int:
    if config.n_classes is not None:
        return config.n_classes
    top = max(int(untrusted.annotations.max()), int(trusted.labels.max()))
    return top + 1


class _Run:
    """Mutable state of one alternating-optimization run."""

    def __init__(self, untrusted, trusted, config: TrainConfig, validation=None):
        self.U, self.D, self.cfg, self.V = untrusted, trusted, config, validation
        self.C = _n_classes(untrusted, trusted, config)
        self.prior = estimate_class_prior(trusted, self.C, config.prior_alpha)
        self.history = TrainHistory()
        self.clf = init_mlp(untrusted.features.shape[1], config.classifier_hidden, self.C, derive_rng(config.seed, "classifier-init"))
        self.epoch = 0
        self.calibrator = None
        self.confusions = None
        self.aggnet = None
        self.p_l = None

    # -- views -----------------------------------------------------------
    def data_view(self, X: np.ndarray) -> PredictionBatch:
        raw = predict_proba(self.clf, X)
        if not self.cfg.calibrate:
            return PredictionBatch(raw, DATA, calibrated=False)
        self.calibrator = fit_multiclass_calibrator(
            predict_proba(self.clf, self.D.features), self.D.labels, self.C, self.cfg.min_class_points
        )
        return PredictionBatch(self.calibrator(raw), DATA, calibrated=True)

    def aggregator_predict(self, A: np.ndarray) -> np.ndarray:
        if self.cfg.variant == "tcls":
            return agg.neural_aggregator_predict(self.aggnet, A, self.C)
        return agg.nb_posterior_batch(A, self.confusions, self.prior)

    def fit_aggregator(self, colabels: np.ndarray, t: int) -> float:
        A = self.U.annotations
        if self.cfg.variant == "tcls":
            self.aggnet, trace = agg.fit_neural_aggregator(
                A, colabels, self.aggnet, self.cfg.aggregator_opt, derive_rng(self.cfg.seed, "aggregator-shuffle", t)
            )
            loss = trace[-1] if trace else math.nan
        else:
            self.confusions = agg.fit_nb_confusions(A, colabels, self.cfg.confusion_alpha)
            loss = agg.nb_loss(A, colabels, self.confusions, self.prior) / A.shape[0]
        p_l = self.aggregator_predict(A)
        calibrated = False
        if self.cfg.calibrates_aggregator:
            if self.D.annotations is None:
                raise ValueError("calibrating the aggregator needs trusted annotations")
            cal = fit_multiclass_calibrator(
                self.aggregator_predict(self.D.annotations), self.D.labels, self.C, self.cfg.min_class_points
            )
            p_l = cal(p_l)
            calibrated = True
        self.p_l = PredictionBatch(p_l, AGGREGATOR, calibrated=calibrated)
        return loss

    def combine(self) -> np.ndarray:
        colabels = combine_batch(self.data_view(self.U.features), self.p_l, self.prior, require_calibrated=self.cfg.calibrate)
        assert check_soft_labels(colabels)
        self.history.colabel_updates += 1
        return colabels

    # -- stages ----------------------------------------------------------
    def init_colabels(self) -> np.ndarray:
        if self.cfg.variant == "tcls":
            self.aggnet = agg.init_neural_aggregator(
                self.U.n_annotators, self.C, derive_rng(self.cfg.seed, "aggregator-init"), self.cfg.aggregator_hidden
            )
        if self.cfg.init_mode == "trusted-nb":
            return agg.init_colabels_trusted_nb(self.D, self.U.annotations, self.prior, self.cfg.confusion_alpha)
        return agg.majority_vote(self.U.annotations, self.C)

    def record(self, t: int, colabels: np.ndarray, clf_loss: float, agg_loss: float, updates: int) -> None:
        rec = IterationRecord(t + 1, clf_loss=clf_loss, agg_loss=agg_loss, updates=updates)
        if self.U.truth is not None:
            rec.colabel_acc = accuracy(colabels, self.U.truth)
        eval_set = self.V if self.V is not None else None
        if eval_set is not None:
            raw = predict_proba(self.clf, eval_set.features)
            rec.clf_val_acc = accuracy(raw, eval_set.truth)
            rec.ece_pre = expected_calibration_error(raw, eval_set.truth, self.cfg.ece_bins)
            if self.calibrator is not None and self.cfg.calibrate:
                rec.ece_post = expected_calibration_error(self.calibrator(raw), eval_set.truth, self.cfg.ece_bins)
            A = eval_set.annotations
            usable = not np.all(A == MISSING) and (self.cfg.variant != "tcls" or not np.any(A == MISSING))
            if usable:
                rec.agg_val_acc = accuracy(self.aggregator_predict(A), eval_set.truth)
        self.history.records.append(rec)


def _check_inputs(untrusted: UntrustedDataset, trusted: TrustedDataset, config: TrainConfig, complete: bool) -> None:
    if untrusted.features.shape[1] != trusted.features.shape[1]:
        raise ValueError("untrusted and trusted feature dimensions differ")
    if complete:
        if not untrusted.is_complete():
            raise ValueError("TCLS requires complete annotations")
        if trusted.annotations is None or np.any(trusted.annotations == MISSING):
            raise ValueError("TCLS requires complete annotations on the trusted set")


def run_alternating(untrusted, trusted, config: TrainConfig, validation=None) -> TrainResult:
    """Shared loop for both variants: per iteration, fit the aggregator, combine,
    train the classifier, combine again; then retrain."""
    if config.variant == "dl-mv":
        raise ValueError("use run_baseline_mv for the dl-mv baseline")
    _check_inputs(untrusted, trusted, config, complete=config.variant == "tcls")
    run = _Run(untrusted, trusted, config, validation)
    colabels = run.init_colabels()
    for t in range(config.iterations):
        before = run.history.colabel_updates
        agg_loss = run.fit_aggregator(colabels, t)
        colabels = run.combine()
        n_ep = config.epochs_at(t)
        run.clf, trace = train_epochs(
            run.clf, untrusted.features, colabels, config.classifier_opt,
            derive_rng(config.seed, "classifier-shuffle", t), epochs=n_ep, start_epoch=run.epoch,
        )
        run.epoch += n_ep
        colabels = run.combine()
        run.record(t, colabels, trace[-1] if trace else math.nan, agg_loss, run.history.colabel_updates - before)
        log.info("iter %d: co-label acc %.4f", t + 1, run.history.records[-1].colabel_acc)

    pre = run.clf
    final = retrain(untrusted, colabels, trusted, config, current=pre)
    return TrainResult(
        classifier=final,
        history=run.history,
        colabels=colabels,
        prior=run.prior,
        pre_retrain=pre,
        confusions=run.confusions,
        aggregator=run.aggnet,
        calibrator=run.calibrator,
    )


def run_tcl(untrusted, trusted, config: TrainConfig, validation=None) -> TrainResult:
    if config.variant != "tcl":
        config = TrainConfig.from_dict({**config.to_dict(), "variant": "tcl"})
    return run_alternating(untrusted, trusted, config, validation)


def run_tcls(untrusted, trusted, config: TrainConfig, validation=None) -> TrainResult:
    if config.variant != "tcls":
        config = TrainConfig.from_dict({**config.to_dict(), "variant": "tcls"})
    return run_alternating(untrusted, trusted, config, validation)


def retrain(untrusted: UntrustedDataset, colabels: np.ndarray, trusted: TrustedDataset, config: TrainConfig, current: MLP | None = None) -> MLP:
    """Fresh classifier on final co-labels (plus clean trusted labels in ``full`` mode)."""
    if config.retrain == "none":
        if current is None:
            raise ValueError("retrain mode 'none' needs the current classifier")
        return current
    C = colabels.shape[1]
    net = init_mlp(untrusted.features.shape[1], config.classifier_hidden, C, derive_rng(config.seed, "retrain-init"))
    X, Y = untrusted.features, colabels
    weight = None
    if config.retrain == "full":
        X = np.vstack([X, trusted.features])
        Y = np.vstack([Y, one_hot(trusted.labels, C)])
        if config.trusted_weight != 1.0:
            weight = np.concatenate([np.ones(untrusted.n), np.full(trusted.u, config.trusted_weight)])
    net, _ = train_epochs(
        net, X, Y, config.classifier_opt, derive_rng(config.seed, "retrain-shuffle"),
        epochs=config.retrain_epochs, sample_weight=weight,
    )
    return net


def run_baseline_mv(untrusted, trusted, config: TrainConfig, finetune: bool | None = None) -> MLP:
    """Classifier on hard majority-vote labels, optionally fine-tuned on the trusted set."""
    finetune = config.finetune if finetune is None else finetune
    C = _n_classes(untrusted, trusted, config)
    labels = agg.hard_majority_vote(untrusted.annotations, C)
    net = init_mlp(untrusted.features.shape[1], config.classifier_hidden, C, derive_rng(config.seed, "classifier-init"))
    epochs = config.baseline_epochs
    if epochs is None:
        epochs = config.alternation_epochs() + config.retrain_epochs
    net, _ = train_epochs(
        net, untrusted.features, one_hot(labels, C), config.classifier_opt,
        derive_rng(config.seed, "baseline-shuffle"), epochs=epochs,
    )
    if finetune:
        net, _ = fine_tune(net, trusted, config.finetune_opt, derive_rng(config.seed, "finetune-shuffle"), C)
    return net


def evaluate(net: MLP, features: np.ndarray, labels, bins: int = DEFAULT_BINS) -> dict:
    probs = predict_proba(net, features)
    labels = np.asarray(labels, dtype=int)
    pred = probs.argmax(axis=1)
    per_class = {}
    for k in range(probs.shape[1]):
        mask = labels == k
        per_class[k] = float(np.mean(pred[mask] == k)) if mask.any() else math.nan
    report = reliability_report(probs, labels, bins)
    return {"accuracy": float(np.mean(pred == labels)), "per_class": per_class, "ece": report.ece, "report": report}
