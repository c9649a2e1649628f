"""Domain types, dataset I/O and validation, class priors, and seeded RNG streams."""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

MISSING = -1
ROW_TOL = 1e-9


class LabeledExample(NamedTuple):
    id: str
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class UntrustedDataset:
    ids: list[str]
    features: np.ndarray  # (n, d)
    annotations: np.ndarray  # (n, m) int, MISSING = -1
    truth: np.ndarray | None = None  # simulation only

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def n_annotators(self) -> int:
        return self.annotations.shape[1]

    def is_complete(self) -> bool:
        return not np.any(self.annotations == MISSING)


@dataclass(frozen=True)
class TrustedDataset:
    ids: list[str]
    features: np.ndarray
    labels: np.ndarray
    annotations: np.ndarray | None = None  # required by TCLS

    def __post_init__(self):
        if len(self.ids) == 0:
            raise ValueError("trusted dataset must be nonempty")
        if self.annotations is not None and self.annotations.shape[0] != len(self.ids):
            raise ValueError("trusted annotations row count differs from example count")

    @property
    def u(self) -> int:
        return len(self.ids)

    def examples(self) -> Iterator[LabeledExample]:
        for i, id_ in enumerate(self.ids):
            yield LabeledExample(id_, self.features[i], int(self.labels[i]))

    @classmethod
    def from_examples(cls, examples: list[LabeledExample], annotations=None) -> "TrustedDataset":
        if not examples:
            raise ValueError("trusted dataset must be nonempty")
        return cls(
            ids=[e.id for e in examples],
            features=np.stack([np.asarray(e.features, dtype=float) for e in examples]),
            labels=np.array([e.label for e in examples], dtype=int),
            annotations=None if annotations is None else np.asarray(annotations, dtype=int),
        )

    def subset(self, idx) -> "TrustedDataset":
        idx = np.asarray(idx, dtype=int)
        return TrustedDataset(
            ids=[self.ids[i] for i in idx],
            features=self.features[idx],
            labels=self.labels[idx],
            annotations=None if self.annotations is None else self.annotations[idx],
        )


def check_soft_labels(mat: np.ndarray, tol: float = ROW_TOL) -> bool:
    """True if every row is a probability vector (entries in [0, 1], sum 1 within tol)."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2:
        return False
    if np.any(mat < 0) or np.any(mat > 1):
        return False
    return bool(np.all(np.abs(mat.sum(axis=1) - 1.0) <= tol))


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def validate_dataset(untrusted: UntrustedDataset, trusted: TrustedDataset, n_classes: int) -> list[str]:
    """Return a list of human-readable violations; empty means the pair is usable."""
    problems = []
    X, A = untrusted.features, untrusted.annotations
    if X.ndim != 2:
        problems.append("untrusted features must be a 2-d matrix")
        return problems
    if X.shape[0] != A.shape[0]:
        problems.append(f"row count mismatch: features have {X.shape[0]} rows, annotations {A.shape[0]}")
    if len(untrusted.ids) != X.shape[0]:
        problems.append("row count mismatch: ids vs features")
    if trusted.features.ndim != 2 or trusted.features.shape[1] != X.shape[1]:
        problems.append(
            f"dimension mismatch: untrusted d={X.shape[1]}, trusted d={trusted.features.shape[-1]}"
        )
    if np.any((A != MISSING) & ((A < 0) | (A >= n_classes))) or np.any(A < MISSING):
        problems.append(f"annotation label outside 0..{n_classes - 1}")
    for i in np.flatnonzero(np.all(A == MISSING, axis=1)):
        problems.append(f"all-missing row at index {i}")
    for j in np.flatnonzero(np.all(A == MISSING, axis=0)):
        problems.append(f"empty annotator column {j}")
    if np.any((trusted.labels < 0) | (trusted.labels >= n_classes)):
        problems.append(f"trusted label outside 0..{n_classes - 1}")
    if untrusted.truth is not None and np.any((untrusted.truth < 0) | (untrusted.truth >= n_classes)):
        problems.append(f"truth label outside 0..{n_classes - 1}")
    if trusted.annotations is not None:
        T = trusted.annotations
        if T.shape[1] != A.shape[1]:
            problems.append(f"annotator count mismatch: untrusted m={A.shape[1]}, trusted m={T.shape[1]}")
        if np.any((T != MISSING) & ((T < 0) | (T >= n_classes))):
            problems.append(f"trusted annotation label outside 0..{n_classes - 1}")
    return problems


def estimate_class_prior(trusted: TrustedDataset | np.ndarray, n_classes: int, alpha: float = 1.0) -> np.ndarray:
    """Smoothed class frequencies: (count_k + alpha) / (u + alpha * C)."""
    labels = trusted.labels if isinstance(trusted, TrustedDataset) else np.asarray(trusted, dtype=int)
    if labels.size == 0:
        raise ValueError("cannot estimate a class prior from an empty trusted set")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    counts = np.bincount(labels, minlength=n_classes).astype(float)
    return (counts + alpha) / (labels.size + alpha * n_classes)


# --- randomness ---------------------------------------------------------

def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode())


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """Independent generator for (seed, *keys); same inputs give the same stream."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


# --- CSV formats ------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_table(path, header: list[str], ids: list[str], values: np.ndarray) -> None:
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for id_, row in zip(ids, values):
            w.writerow([id_] + [_fmt(v) for v in row.tolist()])


def read_table(path, dtype=float) -> tuple[list[str], list[str], np.ndarray]:
    """Read an ``id,...`` table; returns (column names after id, ids, values)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "id":
        raise ValueError(f"{path}: expected header starting with 'id'")
    header, body = rows[0][1:], rows[1:]
    ids = [r[0] for r in body]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate ids")
    values = np.array([[dtype(v) for v in r[1:]] for r in body], dtype=dtype).reshape(len(body), len(header))
    return header, ids, values


def write_features(path, ids, X) -> None:
    write_table(path, ["id"] + [f"f{k}" for k in range(X.shape[1])], ids, X)


def write_annotations(path, ids, A) -> None:
    write_table(path, ["id"] + [f"a{j}" for j in range(A.shape[1])], ids, A.astype(int))


def write_labels(path, ids, labels, annotations=None) -> None:
    labels = np.asarray(labels, dtype=int)[:, None]
    header = ["id", "label"]
    if annotations is not None:
        header += [f"a{j}" for j in range(annotations.shape[1])]
        labels = np.hstack([labels, annotations.astype(int)])
    write_table(path, header, ids, labels)


def _lookup(ids, index: dict[str, int], what: str) -> np.ndarray:
    missing = [i for i in ids if i not in index]
    if missing:
        raise ValueError(f"{len(missing)} ids missing from {what}, e.g. {missing[0]!r}")
    return np.array([index[i] for i in ids], dtype=int)


@dataclass
class DatasetFiles:
    """Paths of one dataset on disk; ``validation`` files are optional."""

    features: Path
    annotations: Path
    trusted: Path
    truth: Path | None = None
    validation: Path | None = None
    val_annotations: Path | None = None

    @classmethod
    def in_dir(cls, root) -> "DatasetFiles":
        root = Path(root)
        opt = lambda name: (root / name) if (root / name).exists() else None  # noqa: E731
        return cls(
            features=root / "features.csv",
            annotations=root / "annotations.csv",
            trusted=root / "trusted.csv",
            truth=opt("truth.csv"),
            validation=opt("validation.csv"),
            val_annotations=opt("val_annotations.csv"),
        )


@dataclass
class LoadedData:
    untrusted: UntrustedDataset
    trusted: TrustedDataset
    validation: UntrustedDataset | None = None
    extra: dict = field(default_factory=dict)


def load_dataset(files: DatasetFiles) -> LoadedData:
    """Join the CSV files by id. Untrusted order follows annotations.csv."""
    _, fid, X = read_table(files.features, float)
    findex = {k: i for i, k in enumerate(fid)}
    _, uid, A = read_table(files.annotations, int)
    U_X = X[_lookup(uid, findex, "features.csv")]

    truth = None
    if files.truth is not None:
        _, tid, tv = read_table(files.truth, int)
        tindex = {k: i for i, k in enumerate(tid)}
        truth = tv[_lookup(uid, tindex, "truth.csv"), 0]
    untrusted = UntrustedDataset(uid, U_X, A, truth)

    cols, sid, S = read_table(files.trusted, int)
    if cols[0] != "label":
        raise ValueError("trusted.csv: second column must be 'label'")
    trusted = TrustedDataset(
        ids=sid,
        features=X[_lookup(sid, findex, "features.csv")],
        labels=S[:, 0],
        annotations=S[:, 1:] if len(cols) > 1 else None,
    )

    validation = None
    if files.validation is not None:
        _, vid, V = read_table(files.validation, int)
        VA = np.full((len(vid), A.shape[1]), MISSING, dtype=int)
        if files.val_annotations is not None:
            _, aid, AV = read_table(files.val_annotations, int)
            aindex = {k: i for i, k in enumerate(aid)}
            VA = AV[_lookup(vid, aindex, "val_annotations.csv")]
        validation = UntrustedDataset(vid, X[_lookup(vid, findex, "features.csv")], VA, V[:, 0])
    return LoadedData(untrusted, trusted, validation)


def save_dataset(root, data: LoadedData) -> DatasetFiles:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    u, t, v = data.untrusted, data.trusted, data.validation
    ids = list(u.ids) + list(t.ids) + (list(v.ids) if v is not None else [])
    feats = [u.features, t.features] + ([v.features] if v is not None else [])
    write_features(root / "features.csv", ids, np.vstack(feats))
    write_annotations(root / "annotations.csv", u.ids, u.annotations)
    write_labels(root / "trusted.csv", t.ids, t.labels, t.annotations)
    if u.truth is not None:
        write_labels(root / "truth.csv", u.ids, u.truth)
    if v is not None:
        write_labels(root / "validation.csv", v.ids, v.truth)
        if not np.all(v.annotations == MISSING):
            write_annotations(root / "val_annotations.csv", v.ids, v.annotations)
    return DatasetFiles.in_dir(root)
