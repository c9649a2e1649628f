"""Command-line entry point: ``colabel {simulate,train,evaluate,ablate}``.

Exit codes: 0 success, 1 invalid config / data / precondition, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import aggregator as agg
from .calibration import reliability_report
from .classifier import MLP, predict_proba
from .config import AblationConfig, ConfigError, ExperimentConfig, load_config
from .core import (
    LoadedData,
    derive_rng,
    load_dataset,
    one_hot,
    read_table,
    save_dataset,
    validate_dataset,
    write_table,
)
from .noise_sim import annotator_accuracy
from .synthetic import simulate
from .trainer import IterationRecord, TrainConfig, TrainHistory, evaluate, run_alternating, run_baseline_mv

log = logging.getLogger("colabel")


class ValidationFailure(Exception):
    """Bad input: maps to exit code 1."""


# --- helpers ---------------------------------------------------------------

def _setup_logging() -> None:
    level = os.environ.get("COLABEL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _with_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out = args.out
    train = cfg.train.to_dict()
    train["seed"] = cfg.seed
    if cfg.classes is not None:
        train["n_classes"] = cfg.classes
    if getattr(args, "variant", None):
        train["variant"] = args.variant
    if getattr(args, "finetune", False):
        train["finetune"] = True
    if getattr(args, "iterations", None) is not None:
        train["iterations"] = args.iterations
    for key, value in _parse_ablate(getattr(args, "ablate", None) or []):
        if len(value) != 1:
            raise ConfigError(f"--ablate {key}: train takes a single value")
        train.update(_train_setting(key, value[0]))
    cfg.train = TrainConfig.from_dict(train)
    return cfg


_BOOL = {"on": True, "off": False, "true": True, "false": False, "1": True, "0": False}
_AXES = {"calibration": "calibration", "trusted-size": "trusted_sizes", "trusted_sizes": "trusted_sizes",
         "retrain": "retrain", "init": "colabel_init", "colabel_init": "colabel_init"}


def _parse_ablate(items: list[str]) -> list[tuple[str, list[str]]]:
    out = []
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--ablate expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        if key not in _AXES:
            raise ConfigError(f"unknown ablation axis {key!r}; choose from {sorted(set(_AXES))}")
        out.append((_AXES[key], value.split(",")))
    return out


def _axis_value(axis: str, raw: str):
    if axis == "calibration":
        if raw.lower() not in _BOOL:
            raise ConfigError(f"calibration must be on/off, got {raw!r}")
        return _BOOL[raw.lower()]
    if axis == "trusted_sizes":
        return int(raw)
    return raw


def _train_setting(axis: str, raw) -> dict:
    value = _axis_value(axis, raw) if isinstance(raw, str) else raw
    if axis == "calibration":
        return {"calibrate": value}
    if axis == "retrain":
        return {"retrain": value}
    if axis == "colabel_init":
        return {"colabel_init": value}
    raise ConfigError(f"{axis} can only be swept with the ablate command")


def _load_data(cfg: ExperimentConfig) -> LoadedData:
    if cfg.simulation is not None:
        return simulate(cfg.simulation, cfg.seed)
    try:
        return load_dataset(cfg.data)
    except (OSError, ValueError) as exc:
        raise ValidationFailure(f"cannot load dataset: {exc}") from None


def _check(data: LoadedData, n_classes: int) -> None:
    problems = validate_dataset(data.untrusted, data.trusted, n_classes)
    if problems:
        raise ValidationFailure("dataset validation failed:\n  " + "\n  ".join(problems[:20]))


def _n_classes(cfg: ExperimentConfig, data: LoadedData) -> int:
    if cfg.classes is not None:
        return cfg.classes
    return int(max(data.untrusted.annotations.max(), data.trusted.labels.max())) + 1


def _eval_target(data: LoadedData):
    if data.validation is not None:
        return data.validation.features, data.validation.truth
    return data.trusted.features, data.trusted.labels


def _train_once(data: LoadedData, train: TrainConfig) -> dict:
    """Run one configured variant; returns artifacts for writing/reporting."""
    C = train.n_classes
    U, D, V = data.untrusted, data.trusted, data.validation
    if train.variant == "tcls" and not U.is_complete():
        raise ValidationFailure("TCLS requires complete annotations")
    if train.variant == "tcls" and (D.annotations is None or not np.all(D.annotations >= 0)):
        raise ValidationFailure("TCLS requires complete annotations on the trusted set")
    if train.variant != "dl-mv" and train.init_mode == "trusted-nb" and (D.annotations is None or np.any(D.annotations < 0)):
        raise ValidationFailure("trusted-nb co-label initialization requires complete trusted annotations")
    if train.variant == "dl-mv":
        net = run_baseline_mv(U, D, train)
        colabels = one_hot(agg.hard_majority_vote(U.annotations, C), C)
        X, y = _eval_target(data)
        raw = predict_proba(net, X)
        hist = None
        result = dict(classifier=net, colabels=colabels, history=hist, pre_retrain=None,
                      confusions=agg.fit_nb_confusions(U.annotations, colabels, train.confusion_alpha))
        result["row"] = {"iter": 1, "clf_val_acc": float(np.mean(raw.argmax(1) == y)),
                         "ece_pre": reliability_report(raw, y, train.ece_bins).ece}
        return result
    res = run_alternating(U, D, train, V)
    confusions = res.confusions
    if confusions is None:
        confusions = agg.fit_nb_confusions(U.annotations, res.colabels, train.confusion_alpha)
    return dict(classifier=res.classifier, colabels=res.colabels, history=res.history,
                pre_retrain=res.pre_retrain, confusions=confusions)


def _write_train_outputs(out: Path, data: LoadedData, train: TrainConfig, art: dict) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    C = train.n_classes
    if art["history"] is not None:
        art["history"].to_csv(out / "metrics.csv")
    else:
        TrainHistory([IterationRecord(**art["row"])]).to_csv(out / "metrics.csv")
    write_table(out / "colabels.csv", ["id"] + [f"p{k}" for k in range(C)], data.untrusted.ids, art["colabels"])
    art["classifier"].save(out / "checkpoint.json", n_classes=C, variant=train.variant)
    (out / "confusions.json").write_text(agg.confusions_to_json(art["confusions"]) + "\n")
    X, y = _eval_target(data)
    ev = evaluate(art["classifier"], X, y, train.ece_bins)
    ev["report"].to_csv(out / "reliability_bins.csv")
    summary = {
        "variant": train.variant,
        "eval_split": "validation" if data.validation is not None else "trusted",
        "accuracy": ev["accuracy"],
        "per_class_accuracy": {str(k): v for k, v in ev["per_class"].items()},
        "ece": ev["ece"],
    }
    if data.untrusted.truth is not None:
        summary["colabel_acc"] = float(np.mean(art["colabels"].argmax(1) == data.untrusted.truth))
    if art.get("pre_retrain") is not None:
        summary["pre_retrain_accuracy"] = evaluate(art["pre_retrain"], X, y, train.ece_bins)["accuracy"]
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary


# --- commands -------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig) -> int:
    if cfg.simulation is None:
        raise ValidationFailure("simulate needs a 'simulation' block in the config")
    data = simulate(cfg.simulation, cfg.seed)
    out = Path(cfg.out)
    try:
        save_dataset(out, data)
    except OSError as exc:
        raise ValidationFailure(f"cannot write to {out}: {exc}") from None
    acc = annotator_accuracy(data.untrusted.truth, data.untrusted.annotations)
    print(f"wrote {data.untrusted.n} untrusted, {data.trusted.u} trusted, "
          f"{0 if data.validation is None else data.validation.n} validation instances to {out}")
    for j, a in enumerate(acc):
        print(f"  annotator {j:3d}: accuracy vs truth {a:.4f}")
    return 0


def cmd_train(cfg: ExperimentConfig) -> int:
    data = _load_data(cfg)
    C = _n_classes(cfg, data)
    _check(data, C)
    train = dataclasses.replace(cfg.train, n_classes=C)
    art = _train_once(data, train)
    summary = _write_train_outputs(Path(cfg.out), data, train, art)
    print(json.dumps(summary, indent=1, sort_keys=True))
    return 0


def cmd_evaluate(checkpoint: str, features: str, labels: str, out: str | None, bins: int) -> int:
    try:
        net = MLP.load(checkpoint)
        _, fid, X = read_table(features, float)
        _, lid, L = read_table(labels, int)
    except (OSError, ValueError, KeyError) as exc:
        raise ValidationFailure(f"cannot read inputs: {exc}") from None
    index = {k: i for i, k in enumerate(fid)}
    missing = [i for i in lid if i not in index]
    if missing:
        raise ValidationFailure(f"{len(missing)} labeled ids have no features, e.g. {missing[0]!r}")
    X = X[[index[i] for i in lid]]
    if X.shape[1] != net.in_dim:
        raise ValidationFailure(f"checkpoint expects {net.in_dim} features, data has {X.shape[1]}")
    y = L[:, 0]
    if y.max() >= net.out_dim:
        raise ValidationFailure(f"labels exceed the checkpoint's {net.out_dim} classes")
    ev = evaluate(net, X, y, bins)
    result = {"accuracy": ev["accuracy"], "per_class_accuracy": {str(k): v for k, v in ev["per_class"].items()}, "ece": ev["ece"]}
    if out:
        outp = Path(out)
        outp.mkdir(parents=True, exist_ok=True)
        ev["report"].to_csv(outp / "reliability_bins.csv")
        (outp / "evaluation.json").write_text(json.dumps(result, indent=1, sort_keys=True) + "\n")
    print(json.dumps(result, indent=1, sort_keys=True))
    return 0


ABLATION_COLUMNS = ("axis", "value", "seed", "colabel_acc", "val_acc", "pre_retrain_val_acc", "ece_pre", "ece_post")


def _trusted_subset(data: LoadedData, size: int, seed: int) -> LoadedData:
    D = data.trusted
    if size > D.u:
        raise ValidationFailure(f"trusted size {size} exceeds the {D.u} available trusted examples")
    order = derive_rng(seed, "trusted-subset").permutation(D.u)
    return LoadedData(data.untrusted, D.subset(np.sort(order[:size])), data.validation)


def cmd_ablate(cfg: ExperimentConfig) -> int:
    axes = cfg.ablation.axes()
    if not axes:
        raise ValidationFailure("ablate needs at least one ablation axis")
    data = _load_data(cfg)
    C = _n_classes(cfg, data)
    _check(data, C)
    base = dataclasses.replace(cfg.train, n_classes=C)
    X, y = _eval_target(data)
    rows = []
    for axis, values in axes:
        for value in values:
            cell = data
            train = base
            if axis == "trusted_sizes":
                cell = _trusted_subset(data, int(value), cfg.seed)
            else:
                train = TrainConfig.from_dict({**base.to_dict(), **_train_setting(axis, value)})
            art = _train_once(cell, train)
            hist = art["history"]
            last = hist.records[-1] if hist is not None and len(hist) else None
            row = {
                "axis": axis,
                "value": value,
                "seed": cfg.seed,
                "colabel_acc": last.colabel_acc if last else float("nan"),
                "val_acc": evaluate(art["classifier"], X, y)["accuracy"],
                "pre_retrain_val_acc": evaluate(art["pre_retrain"], X, y)["accuracy"] if art["pre_retrain"] is not None else float("nan"),
                "ece_pre": last.ece_pre if last else float("nan"),
                "ece_post": last.ece_post if last else float("nan"),
            }
            rows.append(row)
            log.info("ablation %s=%s: val acc %.4f", axis, value, row["val_acc"])
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ablation_report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ABLATION_COLUMNS)
        for r in rows:
            w.writerow([_cell(r[c]) for c in ABLATION_COLUMNS])
    for r in rows:
        print(f"{r['axis']}={r['value']}: colabel_acc={r['colabel_acc']:.4f} val_acc={r['val_acc']:.4f}")
    return 0


def _cell(v) -> str:
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, float):
        return "" if np.isnan(v) else repr(v)
    return str(v)


# --- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="colabel", description="Co-label learning from multiple noisy annotators")
    sub = p.add_subparsers(dest="command", required=True)

    def shared(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="experiment config (JSON)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="output directory")

    s = sub.add_parser("simulate", help="generate a synthetic dataset")
    shared(s)

    for name, help_ in (("train", "train a variant or baseline"), ("ablate", "run an ablation sweep")):
        t = sub.add_parser(name, help=help_)
        shared(t)
        t.add_argument("--variant", choices=("tcl", "tcls", "dl-mv"))
        t.add_argument("--finetune", action="store_true", help="fine-tune the dl-mv baseline on trusted data")
        t.add_argument("--iterations", type=int, help="alternating iterations T")
        t.add_argument("--ablate", action="append", metavar="AXIS=V[,V...]",
                       help="calibration=on|off, retrain=full|noisy-only|none, init=mv|trusted-nb, trusted-size=N[,N]")

    e = sub.add_parser("evaluate", help="evaluate a checkpoint on labeled data")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", help="dataset dir (uses features.csv and validation.csv)")
    e.add_argument("--features", help="features CSV")
    e.add_argument("--labels", help="id,label CSV")
    e.add_argument("--bins", type=int, default=15)
    e.add_argument("--out", help="directory for evaluation.json and reliability_bins.csv")
    e.add_argument("--seed", type=int, help="accepted for interface symmetry; evaluation is deterministic")
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "evaluate":
            features, labels = args.features, args.labels
            if args.data:
                features = features or str(Path(args.data) / "features.csv")
                labels = labels or str(Path(args.data) / "validation.csv")
            if not features or not labels:
                raise ValidationFailure("evaluate needs --data or both --features and --labels")
            return cmd_evaluate(args.checkpoint, features, labels, args.out, args.bins)

        cfg = load_config(args.config)
        if args.command == "ablate":
            sweeps = _parse_ablate(args.ablate or [])
            args.ablate = None
            cfg = _with_overrides(cfg, args)
            if sweeps:  # command-line sweeps replace the config's ablation block
                cfg.ablation = AblationConfig()
            for axis, values in sweeps:
                setattr(cfg.ablation, axis, [_axis_value(axis, v) for v in values])
            return cmd_ablate(cfg)
        cfg = _with_overrides(cfg, args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_train(cfg)
    except (ConfigError, ValidationFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
