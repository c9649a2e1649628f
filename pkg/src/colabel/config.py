"""JSON experiment configuration.

Schema (all keys optional except one of ``data`` / ``simulation``)::

    {
      "seed": 0,
      "n_classes": 3,
      "out": "runs/example",
      "data": {"dir": "path/to/csvs"}            # or explicit file paths:
              {"features": ..., "annotations": ..., "trusted": ...,
               "truth": ..., "validation": ..., "val_annotations": ...},
      "simulation": {"n_classes": 3, "dim": 2, "n_untrusted": 3000, "n_trusted": 150,
                     "n_validation": 1000, "separation": 4.0, "std": 1.0,
                     "clusters_per_class": 1, "trusted_annotations": true,
                     "annotators": {"specs": [{"kind": "symmetric", "eps": 0.6}, ...],
                                    "labels_per_instance": 3, "annotators_per_spec": 1}},
      "train": {TrainConfig fields; optimizer blocks are partial dicts},
      "ablation": {"calibration": [true, false], "trusted_sizes": [20, 50],
                   "retrain": ["full", "noisy-only", "none"], "colabel_init": ["mv", "trusted-nb"]}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .core import DatasetFiles
from .synthetic import SimulationConfig
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class AblationConfig:
    calibration: list[bool] = field(default_factory=list)
    trusted_sizes: list[int] = field(default_factory=list)
    retrain: list[str] = field(default_factory=list)
    colabel_init: list[str] = field(default_factory=list)

    def axes(self) -> list[tuple[str, list]]:
        return [(k, getattr(self, k)) for k in ("calibration", "trusted_sizes", "retrain", "colabel_init") if getattr(self, k)]


@dataclass
class ExperimentConfig:
    seed: int = 0
    n_classes: int | None = None
    out: str = "runs/latest"
    data: DatasetFiles | None = None
    simulation: SimulationConfig | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)

    def validate(self) -> None:
        if (self.data is None) == (self.simulation is None):
            raise ConfigError("config needs exactly one of 'data' or 'simulation'")

    @property
    def classes(self) -> int | None:
        if self.n_classes is not None:
            return self.n_classes
        if self.simulation is not None:
            return self.simulation.n_classes
        return self.train.n_classes


def _data_files(d: dict, base: Path) -> DatasetFiles:
    if "dir" in d:
        return DatasetFiles.in_dir(base / d["dir"])
    try:
        files = {k: (base / v if v else None) for k, v in d.items()}
        return DatasetFiles(**files)
    except TypeError as exc:
        raise ConfigError(f"bad data block: {exc}") from None


def config_from_dict(d: dict, base: Path | str = ".") -> ExperimentConfig:
    base = Path(base)
    known = {"seed", "n_classes", "out", "data", "simulation", "train", "ablation"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        cfg = ExperimentConfig(
            seed=int(d.get("seed", 0)),
            n_classes=d.get("n_classes"),
            out=d.get("out", "runs/latest"),
            data=_data_files(d["data"], base) if d.get("data") else None,
            simulation=SimulationConfig.from_dict(d["simulation"]) if d.get("simulation") else None,
            train=TrainConfig.from_dict(d.get("train", {})),
            ablation=AblationConfig(**d.get("ablation", {})),
        )
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(d, base=path.parent)
