"""Label-aggregator view: majority vote, Naive Bayes over per-annotator
confusion matrices, and a multilayer neural aggregator for complete data."""

from __future__ import annotations

import json
import logging
from typing import Sequence

import numpy as np

from .classifier import MLP, OptimizerConfig, init_mlp, predict_proba, train_epochs
from .core import MISSING, TrustedDataset, one_hot

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


def majority_vote(annotations: np.ndarray, n_classes: int) -> np.ndarray:
    """Soft majority vote: one-hot on the modal class, uniform over ties."""
    A = np.asarray(annotations, dtype=int)
    if np.any(np.all(A == MISSING, axis=1)):
        bad = int(np.flatnonzero(np.all(A == MISSING, axis=1))[0])
        raise ValueError(f"all-missing row at index {bad}")
    counts = vote_counts(A, n_classes)
    top = counts == counts.max(axis=1, keepdims=True)
    return top / top.sum(axis=1, keepdims=True)


def vote_counts(A: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.zeros((A.shape[0], n_classes))
    for j in range(A.shape[1]):
        obs = A[:, j] != MISSING
        counts[np.flatnonzero(obs), A[obs, j]] += 1
    return counts


def hard_majority_vote(annotations: np.ndarray, n_classes: int) -> np.ndarray:
    """Modal class per row, ties to the lowest class index."""
    return np.argmax(majority_vote(annotations, n_classes), axis=1)


# --- Naive Bayes ---------------------------------------------------------

def nb_log_scores(annotations: np.ndarray, confusions: np.ndarray, prior: np.ndarray) -> np.ndarray:
    """Unnormalized log posterior: log q_k + sum over observed j of log pi^(j)[k, label_j]."""
    A = np.atleast_2d(np.asarray(annotations, dtype=int))
    logpi = np.log(np.maximum(confusions, PROB_FLOOR))
    scores = np.tile(np.log(np.maximum(prior, PROB_FLOOR)), (A.shape[0], 1))
    for j in range(A.shape[1]):
        obs = A[:, j] != MISSING
        scores[obs] += logpi[j][:, A[obs, j]].T
    return scores


def nb_posterior_batch(annotations, confusions, prior, *, return_flags: bool = False):
    scores = nb_log_scores(annotations, confusions, prior)
    top = scores.max(axis=1, keepdims=True)
    bad = ~np.isfinite(top[:, 0])
    top[bad] = 0.0
    e = np.exp(scores - top)
    post = e / e.sum(axis=1, keepdims=True)
    if bad.any():
        log.warning("nb posterior: %d rows underflowed, using uniform", int(bad.sum()))
        post[bad] = 1.0 / post.shape[1]
    return (post, bad) if return_flags else post


def nb_posterior(row, confusions, prior) -> np.ndarray:
    """Posterior over the true class for a single annotation row; MISSING cells add no factor."""
    return nb_posterior_batch(np.asarray(row, dtype=int)[None, :], confusions, prior)[0]


def fit_nb_confusions(annotations: np.ndarray, colabels: np.ndarray, alpha: float = 0.01) -> np.ndarray:
    """Soft-count confusion estimates restricted to instances each annotator labeled.

    pi[j, k, s] = (sum_i [y_ij = s] c_ik + alpha) / (sum_i c_ik + alpha C)
    """
    A = np.asarray(annotations, dtype=int)
    Y = np.asarray(colabels, dtype=float)
    if A.shape[0] != Y.shape[0]:
        raise ValueError("annotations and co-labels differ in row count")
    n_classes = Y.shape[1]
    out = np.empty((A.shape[1], n_classes, n_classes))
    for j in range(A.shape[1]):
        obs = A[:, j] != MISSING
        if not obs.any():
            log.warning("annotator %d labeled nothing; using a uniform confusion matrix", j)
            out[j] = 1.0 / n_classes
            continue
        counts = Y[obs].T @ one_hot(A[obs, j], n_classes)  # (k, s)
        num = counts + alpha
        den = num.sum(axis=1, keepdims=True)
        empty = den[:, 0] <= 0
        den[empty] = 1.0
        out[j] = num / den
        out[j][empty] = 1.0 / n_classes
    return out


def nb_loss(annotations, colabels, confusions, prior) -> float:
    post = nb_posterior_batch(annotations, confusions, prior)
    return float(-(np.asarray(colabels) * np.log(np.maximum(post, PROB_FLOOR))).sum())


def init_colabels_trusted_nb(
    trusted: TrustedDataset, untrusted_annotations: np.ndarray, prior: np.ndarray, alpha: float = 0.01
) -> np.ndarray:
    """Fit confusions on the trusted set (true labels as one-hot co-labels), then
    take the NB posterior of every untrusted row."""
    if trusted.annotations is None:
        raise ValueError("trusted-set NB initialization needs trusted annotations")
    if np.any(trusted.annotations == MISSING):
        raise ValueError("trusted annotations must be complete")
    n_classes = prior.shape[0]
    confusions = fit_nb_confusions(trusted.annotations, one_hot(trusted.labels, n_classes), alpha)
    return nb_posterior_batch(untrusted_annotations, confusions, prior)


def confusions_to_json(confusions: np.ndarray) -> str:
    return json.dumps([{"annotator": j, "matrix": m.tolist()} for j, m in enumerate(confusions)], indent=1)


def confusions_from_json(text: str) -> np.ndarray:
    rows = sorted(json.loads(text), key=lambda r: r["annotator"])
    return np.array([r["matrix"] for r in rows], dtype=float)


# --- neural aggregator ---------------------------------------------------

def encode_annotations(annotations: np.ndarray, n_classes: int) -> np.ndarray:
    """Concatenated one-hot of the m labels -> (n, m*C). Complete rows only."""
    A = np.atleast_2d(np.asarray(annotations, dtype=int))
    if np.any(A == MISSING):
        raise ValueError("TCLS requires complete annotations (found MISSING entries)")
    n, m = A.shape
    enc = np.zeros((n, m * n_classes))
    cols = np.arange(m) * n_classes + A
    enc[np.arange(n)[:, None], cols] = 1.0
    return enc


def init_neural_aggregator(
    n_annotators: int, n_classes: int, rng: np.random.Generator, hidden: Sequence[int] = (64, 32)
) -> MLP:
    return init_mlp(n_annotators * n_classes, hidden, n_classes, rng)


def fit_neural_aggregator(
    annotations: np.ndarray,
    colabels: np.ndarray,
    params: MLP,
    opt: OptimizerConfig,
    rng: np.random.Generator,
    *,
    epochs: int | None = None,
) -> tuple[MLP, list[float]]:
    n_classes = colabels.shape[1]
    X = encode_annotations(annotations, n_classes)
    return train_epochs(params, X, colabels, opt, rng, epochs=epochs)


def neural_aggregator_predict(params: MLP, annotations: np.ndarray, n_classes: int | None = None) -> np.ndarray:
    n_classes = params.out_dim if n_classes is None else n_classes
    A = np.asarray(annotations, dtype=int)
    probs = predict_proba(params, encode_annotations(A, n_classes))
    return probs[0] if A.ndim == 1 else probs
