"""Strict JSON experiment configuration."""
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as data_mod
from .errors import ConfigError, ContractViolation
from .loss import IsdaConfig
from .trainer import OptimizerConfig

SECTIONS = {"data", "model", "optimizer", "isda", "output"}
DATA_KEYS = {"synthetic", "csv", "validation_fraction", "seed"}
SYNTHETIC_KEYS = {"num_classes", "dim", "train_per_class", "test_per_class", "separation", "base_std",
                  "spread_std", "rank", "cross_aligned", "spec_seed", "means", "covariances"}
CSV_KEYS = {"train", "test"}
MODEL_KEYS = {"hidden_sizes", "feature_dim"}
OPTIMIZER_KEYS = {"learning_rate", "momentum", "weight_decay", "nesterov", "lr_drops", "epochs", "batch_size",
                  "shuffle_seed"}
ISDA_KEYS = {"lambda0", "schedule", "covariance_mode", "total_steps", "schedule_unit", "ce_only"}
OUTPUT_KEYS = {"directory", "checkpoint_interval", "reproducible", "last_k"}


def _strict(section, obj, allowed, required=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"section '{section}' must be an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigError(f"missing key(s) in '{section}': {', '.join(missing)}")
    return obj


@dataclass
class ExperimentConfig:
    data: dict
    hidden_sizes: list
    feature_dim: int
    optimizer: OptimizerConfig
    isda: IsdaConfig
    schedule_unit: str = "step"
    ce_only: bool = False
    output_dir: str = "runs/default"
    checkpoint_interval: int = 0
    reproducible: bool = True
    last_k: int = 10
    raw: dict = field(default_factory=dict, repr=False)
    base_dir: Path = field(default=Path("."), repr=False)

    @property
    def data_seed(self):
        return int(self.data.get("seed", 0))

    @property
    def validation_fraction(self):
        return float(self.data.get("validation_fraction") or 0.0)

    def config_hash(self):
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def sizes(self, d_in):
        return [int(d_in)] + [int(h) for h in self.hidden_sizes] + [int(self.feature_dim)]

    def load_datasets(self):
        """``(train, val_or_None, test_or_None)``."""
        d = self.data
        seed = self.data_seed
        if "synthetic" in d:
            syn = d["synthetic"]
            if "means" in syn:
                spec = data_mod.SyntheticSpec(np.array(syn["means"]), np.array(syn["covariances"]),
                                              int(syn["train_per_class"]), int(syn["test_per_class"]))
            else:
                spec = data_mod.anisotropic_spec(
                    num_classes=int(syn.get("num_classes", 4)), dim=int(syn.get("dim", 16)),
                    train_per_class=int(syn.get("train_per_class", 50)),
                    test_per_class=int(syn.get("test_per_class", 1000)),
                    separation=float(syn.get("separation", 2.0)), base_std=float(syn.get("base_std", 0.5)),
                    spread_std=float(syn.get("spread_std", 3.0)), rank=int(syn.get("rank", 3)),
                    cross_aligned=bool(syn.get("cross_aligned", False)), seed=int(syn.get("spec_seed", 0)),
                )
            train, test = data_mod.generate_synthetic(spec, seed)
        else:
            paths = d["csv"]
            train = data_mod.load_csv(self.base_dir / paths["train"])
            test = data_mod.load_csv(self.base_dir / paths["test"]) if paths.get("test") else None
            if test is not None and test.num_classes > train.num_classes:
                raise ConfigError("test CSV has labels not present in the training CSV")
            if test is not None:
                test.num_classes = train.num_classes
        val = None
        if self.validation_fraction > 0:
            train, val = data_mod.split(train, self.validation_fraction, seed)
        return train, val, test


def parse_config(obj, base_dir=Path(".")) -> ExperimentConfig:
    base_dir = Path(base_dir)
    _strict("<root>", obj, SECTIONS, required=("data", "model"))
    d = _strict("data", obj["data"], DATA_KEYS)
    if ("synthetic" in d) == ("csv" in d):
        raise ConfigError("data needs exactly one of 'synthetic' or 'csv'")
    if "synthetic" in d:
        syn = _strict("data.synthetic", d["synthetic"], SYNTHETIC_KEYS)
        if ("means" in syn) != ("covariances" in syn):
            raise ConfigError("data.synthetic: 'means' and 'covariances' go together")
        if "means" in syn:
            _strict("data.synthetic", syn, SYNTHETIC_KEYS,
                    required=("means", "covariances", "train_per_class", "test_per_class"))
    else:
        c = _strict("data.csv", d["csv"], CSV_KEYS, required=("train",))
        for key in ("train", "test"):
            if c.get(key) and not (base_dir / c[key]).is_file():
                raise ConfigError(f"data.csv.{key}: file not found: {c[key]}")
    m = _strict("model", obj["model"], MODEL_KEYS, required=("feature_dim",))
    opt = _strict("optimizer", obj.get("optimizer", {}), OPTIMIZER_KEYS)
    isd = dict(_strict("isda", obj.get("isda", {}), ISDA_KEYS))
    out = _strict("output", obj.get("output", {}), OUTPUT_KEYS)
    schedule_unit = isd.pop("schedule_unit", "step")
    ce_only = bool(isd.pop("ce_only", False))
    if isd.get("total_steps") is None:
        isd["total_steps"] = 1  # replaced by the trainer with the real horizon
    try:
        optimizer = OptimizerConfig(**opt)
        isda = IsdaConfig(**isd)
    except (ContractViolation, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    if schedule_unit not in ("step", "epoch"):
        raise ConfigError(f"isda.schedule_unit must be 'step' or 'epoch', got {schedule_unit!r}")
    return ExperimentConfig(
        data=d,
        hidden_sizes=list(m.get("hidden_sizes", [])),
        feature_dim=int(m["feature_dim"]),
        optimizer=optimizer,
        isda=isda,
        schedule_unit=schedule_unit,
        ce_only=ce_only,
        output_dir=out.get("directory", "runs/default"),
        checkpoint_interval=int(out.get("checkpoint_interval", 0)),
        reproducible=bool(out.get("reproducible", True)),
        last_k=int(out.get("last_k", 10)),
        raw=obj,
        base_dir=base_dir,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(obj, base_dir=path.parent)
