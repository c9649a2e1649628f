"""Feed-forward data classifier trained on soft targets.

A small numpy MLP (ReLU hidden layers, softmax output) with hand-written
backprop, mini-batch SGD with momentum / weight decay, and Adam.  The same
network class backs the neural label aggregator.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import TrustedDataset, one_hot

log = logging.getLogger(__name__)

LOG_FLOOR = 1e-12


@dataclass
class OptimizerConfig:
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 128
    epochs: int = 1
    schedule: list[tuple[int, float]] = field(default_factory=list)
    method: str = "sgd"  # or "adam"
    betas: tuple[float, float] = (0.9, 0.999)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.method not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.method!r}")
        self.schedule = [(int(e), float(m)) for e, m in self.schedule]
        self.betas = tuple(self.betas)

    def lr_at(self, epoch: int) -> float:
        """Base lr times the multiplier of the latest schedule entry at or before ``epoch``."""
        mult = 1.0
        for start, m in sorted(self.schedule):
            if epoch >= start:
                mult = m
        return self.lr * mult

    def replace(self, **kw) -> "OptimizerConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return OptimizerConfig(**d)


@dataclass
class MLP:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "MLP":
        return MLP([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def to_dict(self) -> dict:
        return {f"layer_{i}": {"w": w.tolist(), "b": b.tolist()} for i, (w, b) in enumerate(zip(self.weights, self.biases))}

    @classmethod
    def from_dict(cls, d: dict) -> "MLP":
        keys = sorted(d, key=lambda k: int(k.split("_")[1]))
        return cls(
            [np.asarray(d[k]["w"], dtype=float) for k in keys],
            [np.asarray(d[k]["b"], dtype=float) for k in keys],
        )

    def save(self, path, **meta) -> None:
        payload = self.to_dict()
        if meta:
            payload["meta"] = meta
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path) -> "MLP":
        with open(path) as fh:
            d = json.load(fh)
        d.pop("meta", None)
        return cls.from_dict(d)


def init_mlp(in_dim: int, hidden: Sequence[int], out_dim: int, rng: np.random.Generator) -> MLP:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases."""
    dims = [in_dim, *hidden, out_dim]
    if any(d <= 0 for d in dims):
        raise ValueError(f"layer sizes must be positive, got {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLP(weights, biases)


def init_classifier(d: int, hidden: Sequence[int], n_classes: int, seed: int) -> MLP:
    from .core import derive_rng

    return init_mlp(d, hidden, n_classes, derive_rng(seed, "classifier-init"))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def forward(net: MLP, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Logits plus the list of layer inputs needed by ``backward``."""
    acts = [X]
    h = X
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ W + b
        if i < last:
            h = np.maximum(h, 0.0)
            acts.append(h)
    return h, acts


def predict_proba(net: MLP, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.in_dim:
        raise ValueError(f"feature dim {X.shape[1]} does not match network input dim {net.in_dim}")
    return softmax(forward(net, X)[0])


def soft_cross_entropy(pred, target) -> float | np.ndarray:
    """-sum_k target_k log(max(pred_k, 1e-12)); rowwise for 2-d input."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    return -(target * np.log(np.maximum(pred, LOG_FLOOR))).sum(axis=-1)


def loss_and_grads(net: MLP, X: np.ndarray, T: np.ndarray, w: np.ndarray | None = None):
    """Weighted mean soft cross-entropy of the batch and its gradients.

    Loss uses log-softmax of the logits, so no floor is needed on this path.
    Gradients come back in ``net.params()`` order.
    """
    n = X.shape[0]
    w = np.ones(n) if w is None else np.asarray(w, dtype=float)
    wsum = w.sum()
    logits, acts = forward(net, X)
    logp = log_softmax(logits)
    loss = float(-(w * (T * logp).sum(axis=1)).sum() / wsum)

    # d loss / d logits for softmax + CE with targets that may not sum to 1
    delta = (np.exp(logp) * T.sum(axis=1, keepdims=True) - T) * (w / wsum)[:, None]
    grads = []
    for i in range(len(net.weights) - 1, -1, -1):
        a = acts[i]
        gW = a.T @ delta
        gb = delta.sum(axis=0)
        grads.append((gW, gb))
        if i > 0:
            delta = (delta @ net.weights[i].T) * (a > 0)
    flat = []
    for gW, gb in reversed(grads):
        flat += [gW, gb]
    return loss, flat


class _Optimizer:
    def __init__(self, params: list[np.ndarray], cfg: OptimizerConfig):
        self.cfg = cfg
        self.state = [np.zeros_like(p) for p in params]
        self.state2 = [np.zeros_like(p) for p in params] if cfg.method == "adam" else None
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        cfg = self.cfg
        self.t += 1
        for k, (p, g) in enumerate(zip(params, grads)):
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p
            if cfg.method == "sgd":
                v = self.state[k]
                v *= cfg.momentum
                v += g
                p -= lr * v
            else:
                b1, b2 = cfg.betas
                m, s = self.state[k], self.state2[k]
                m *= b1
                m += (1 - b1) * g
                s *= b2
                s += (1 - b2) * g * g
                mhat = m / (1 - b1**self.t)
                shat = s / (1 - b2**self.t)
                p -= lr * mhat / (np.sqrt(shat) + 1e-8)


def train_epochs(
    net: MLP,
    X: np.ndarray,
    targets: np.ndarray,
    opt: OptimizerConfig,
    rng: np.random.Generator,
    *,
    epochs: int | None = None,
    start_epoch: int = 0,
    sample_weight: np.ndarray | None = None,
) -> tuple[MLP, list[float]]:
    """Mini-batch training on soft targets; returns a new network and the per-epoch mean loss.

    ``start_epoch`` offsets the lr schedule so runs split across calls follow
    one global schedule.  Optimizer state does not persist between calls.
    """
    epochs = opt.epochs if epochs is None else epochs
    X = np.asarray(X, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if X.shape[0] != targets.shape[0]:
        raise ValueError("features and targets differ in row count")
    if X.shape[1] != net.in_dim or targets.shape[1] != net.out_dim:
        raise ValueError("data shape does not match network")
    net = net.copy()
    if epochs == 0:
        return net, []
    n = X.shape[0]
    params = net.params()
    optim = _Optimizer(params, opt)
    trace = []
    for e in range(epochs):
        lr = opt.lr_at(start_epoch + e)
        order = rng.permutation(n)
        total, seen = 0.0, 0.0
        for s in range(0, n, opt.batch_size):
            idx = order[s : s + opt.batch_size]
            w = None if sample_weight is None else sample_weight[idx]
            loss, grads = loss_and_grads(net, X[idx], targets[idx], w)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {start_epoch + e}, batch starting {s}")
            optim.step(params, grads, lr)
            bw = len(idx) if w is None else float(w.sum())
            total += loss * bw
            seen += bw
        trace.append(total / seen)
    return net, trace


def fine_tune(net: MLP, trusted: TrustedDataset, opt: OptimizerConfig, rng: np.random.Generator, n_classes: int | None = None):
    """Continue training on the trusted set with one-hot targets."""
    n_classes = net.out_dim if n_classes is None else n_classes
    return train_epochs(net, trusted.features, one_hot(trusted.labels, n_classes), opt, rng)


def accuracy(probs: np.ndarray, labels) -> float:
    return float(np.mean(np.argmax(probs, axis=1) == np.asarray(labels)))
