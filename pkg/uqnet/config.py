"""
Internal config for uqnet - environment, hyperparameter ledger, run documents
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Tuple

from dotenv import load_dotenv

from uqnet.errors import ConfigurationError

load_dotenv()

LOG_LEVEL = os.getenv("UQNET_LOG", "INFO").upper()  # DEBUG / INFO / WARNING / ERROR
LOG_FILE = os.getenv("UQNET_LOG_FILE", "logs/uqnet.log")

# Canonical order, also the row order of every report table
METHODS = (
    "dropout",
    "mc_dropout",
    "dropconnect",
    "mc_dropconnect",
    "flipout",
    "ensembles",
    "duq",
)
METHOD_NAMES = {
    "dropout": "Standard Dropout",
    "mc_dropout": "MC-Dropout",
    "dropconnect": "Standard DropConnect",
    "mc_dropconnect": "MC-DropConnect",
    "flipout": "Flipout",
    "ensembles": "Ensembles",
    "duq": "DUQ",
}
# Network variant each method trains
METHOD_VARIANTS = {
    "dropout": "dropout",
    "mc_dropout": "mc_dropout",
    "dropconnect": "dropconnect",
    "mc_dropconnect": "mc_dropconnect",
    "flipout": "flipout",
    "ensembles": "ensemble_member",
    "duq": "duq",
}
# Evaluated with one point forward, so mutual information is undefined
STANDARD_METHODS = ("dropout", "dropconnect")

MEASURES = ("predictive_entropy", "expected_entropy", "mutual_information")
MEASURE_NAMES = {
    "predictive_entropy": "Predictive Entropy (Ale+Epi)",
    "expected_entropy": "Expected Entropy (Ale)",
    "mutual_information": "Mutual Information (Epi)",
}
POPULATIONS = ("within", "cross")

MAX_SEED = 2**64


def _strict(cls, data: Any, where: str) -> dict:
    """
    Reject anything that is not a mapping of known field names

    :return: plain dict copy of data
    """
    if not isinstance(data, Mapping):
        raise ConfigurationError(f"{where} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"Unknown keys in {where}: {', '.join(unknown)}")
    return dict(data)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigurationError(message)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_seed(seed: Any) -> int:
    _require(_is_int(seed) and 0 <= seed < MAX_SEED, f"seed must be a u64, got {seed!r}")
    return int(seed)


@dataclass(frozen=True)
class ShallowConvNetConfig:
    """
    Shallow ConvNet topology and the per-method UQ layer settings
    """

    filters: int = 40
    temporal_kernel: int = 25
    pool: int = 75
    pool_stride: int = 15
    dropout_rate: float = 0.2
    dropconnect_rate: float = 0.1
    flipout_hidden: int = 10
    duq_hidden: int = 100
    centroid_dim: int = 100
    length_scale: float = 0.4
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        for name in ("filters", "temporal_kernel", "pool", "pool_stride", "flipout_hidden", "duq_hidden", "centroid_dim"):
            value = getattr(self, name)
            _require(_is_int(value) and value >= 1, f"architecture.{name} must be a positive integer")
        for name in ("dropout_rate", "dropconnect_rate"):
            value = getattr(self, name)
            _require(_is_number(value) and 0 <= value < 1, f"architecture.{name} must be in [0, 1)")
        _require(_is_number(self.length_scale) and self.length_scale > 0, "architecture.length_scale must be > 0")
        _require(_is_number(self.bn_momentum) and 0 < self.bn_momentum <= 1, "architecture.bn_momentum must be in (0, 1]")
        _require(_is_number(self.bn_eps) and self.bn_eps > 0, "architecture.bn_eps must be > 0")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ShallowConvNetConfig":
        return cls(**_strict(cls, data, "architecture"))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrainingConfig:
    """
    Optimizer and early stopping settings shared by every method
    """

    learning_rate: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    dtype: str = "float32"

    def __post_init__(self):
        _require(_is_number(self.learning_rate) and self.learning_rate > 0, "training.learning_rate must be > 0")
        for name in ("batch_size", "max_epochs", "patience"):
            value = getattr(self, name)
            _require(_is_int(value) and value >= 1, f"training.{name} must be a positive integer")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            _require(_is_number(value) and 0 <= value < 1, f"training.{name} must be in [0, 1)")
        _require(_is_number(self.epsilon) and self.epsilon > 0, "training.epsilon must be > 0")
        _require(self.dtype in ("float32", "float64"), "training.dtype must be float32 or float64")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainingConfig":
        return cls(**_strict(cls, data, "training"))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SplitConfig:
    within_frac: float = 0.10
    val_frac: float = 0.10

    def __post_init__(self):
        for name in ("within_frac", "val_frac"):
            value = getattr(self, name)
            _require(_is_number(value) and 0 < value < 1, f"split.{name} must be in (0, 1)")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SplitConfig":
        return cls(**_strict(cls, data, "split"))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StandardizationConfig:
    """
    Exponential moving standardization defaults
    """

    factor_new: float = 1e-3
    eps: float = 1e-4
    init_block: int = 1000

    def __post_init__(self):
        _require(_is_number(self.factor_new) and 0 < self.factor_new < 1, "factor_new must be in (0, 1)")
        _require(_is_number(self.eps) and self.eps > 0, "eps must be > 0")
        _require(_is_int(self.init_block) and self.init_block >= 0, "init_block must be >= 0")


@dataclass(frozen=True)
class PopulationConfig:
    """
    Synthetic multi-subject population

    mixing_scale controls the subject shift (epistemic knob), noise_scale the
    observation noise and amplitude_jitter the log-normal trial-to-trial spread
    of every source amplitude (aleatoric knobs)
    """

    subjects: int = 9
    trials_per_class: int = 72
    channels: int = 22
    timesteps: int = 1125
    classes: int = 4
    sampling_rate: float = 250.0
    sources: int = 8
    mixing_scale: float = 0.5
    noise_scale: float = 0.5
    amplitude_jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("subjects", "trials_per_class", "channels", "timesteps", "classes", "sources"):
            value = getattr(self, name)
            _require(_is_int(value) and value >= 1, f"population.{name} must be a positive integer")
        _require(self.subjects <= 255, "population.subjects must fit in a byte")
        _require(self.classes <= 255, "population.classes must fit in a byte")
        _require(_is_number(self.sampling_rate) and self.sampling_rate > 0, "population.sampling_rate must be > 0")
        for name in ("mixing_scale", "noise_scale", "amplitude_jitter"):
            value = getattr(self, name)
            _require(_is_number(value) and value >= 0, f"population.{name} must be >= 0")
        validate_seed(self.seed)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PopulationConfig":
        return cls(**_strict(cls, data, "population"))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DataSource:
    """
    Either an EPOC file or a synthetic population, never both
    """

    path: Optional[str] = None
    synthetic: Optional[PopulationConfig] = None

    def __post_init__(self):
        _require(
            (self.path is None) != (self.synthetic is None),
            "data must name exactly one of 'path' or 'synthetic'",
        )

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DataSource":
        data = _strict(cls, data, "data")
        if data.get("path") is not None:
            _require(isinstance(data["path"], str), "data.path must be a string")
        if data.get("synthetic") is not None:
            data["synthetic"] = PopulationConfig.from_dict(data["synthetic"])
        return cls(**data)

    def to_dict(self) -> dict:
        if self.path is not None:
            return {"path": self.path}
        return {"synthetic": self.synthetic.to_dict()}


def _default_coverages() -> Tuple[float, ...]:
    return tuple(round(0.1 * step, 2) for step in range(1, 11))


@dataclass(frozen=True)
class RunConfig:
    """
    Single JSON document describing a whole LOSO run
    """

    data: DataSource
    methods: Tuple[str, ...] = METHODS
    passes: int = 50
    ensemble_size: int = 10
    training: TrainingConfig = field(default_factory=TrainingConfig)
    architecture: ShallowConvNetConfig = field(default_factory=ShallowConvNetConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    seed: int = 0
    output_dir: str = "runs/default"
    coverages: Tuple[float, ...] = field(default_factory=_default_coverages)
    subjects: Optional[Tuple[int, ...]] = None  # held-out subjects to run, None = all

    def __post_init__(self):
        _require(len(self.methods) >= 1, "methods must not be empty")
        for method in self.methods:
            _require(method in METHODS, f"Unknown method {method!r}, expected one of {', '.join(METHODS)}")
        _require(len(set(self.methods)) == len(self.methods), "methods must not repeat")
        _require(_is_int(self.passes) and self.passes >= 1, "passes must be a positive integer")
        _require(_is_int(self.ensemble_size) and self.ensemble_size >= 2, "ensemble_size must be >= 2")
        validate_seed(self.seed)
        _require(isinstance(self.output_dir, str) and self.output_dir != "", "output_dir must be a path")
        _require(len(self.coverages) >= 1, "coverages must not be empty")
        for coverage in self.coverages:
            _require(_is_number(coverage) and 0 < coverage <= 1, "coverages must lie in (0, 1]")
        if self.subjects is not None:
            for subject in self.subjects:
                _require(_is_int(subject) and 0 <= subject <= 255, "subjects must be byte-sized integers")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        data = _strict(cls, data, "run config")
        _require("data" in data, "run config needs a 'data' section")
        data["data"] = DataSource.from_dict(data["data"])
        for key, section in (
            ("training", TrainingConfig),
            ("architecture", ShallowConvNetConfig),
            ("split", SplitConfig),
        ):
            if key in data:
                data[key] = section.from_dict(data[key])
        for key in ("methods", "coverages", "subjects"):
            if data.get(key) is not None:
                _require(isinstance(data[key], list), f"{key} must be a list")
                data[key] = tuple(data[key])
        return cls(**data)

    def to_dict(self) -> dict:
        return {
            "data": self.data.to_dict(),
            "methods": list(self.methods),
            "passes": self.passes,
            "ensemble_size": self.ensemble_size,
            "training": self.training.to_dict(),
            "architecture": self.architecture.to_dict(),
            "split": self.split.to_dict(),
            "seed": self.seed,
            "output_dir": self.output_dir,
            "coverages": list(self.coverages),
            "subjects": None if self.subjects is None else list(self.subjects),
        }

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=validate_seed(seed))


def read_json(path: Path | str) -> Any:
    """
    Read a JSON document, turning IO and syntax problems into ConfigurationError
    """
    try:
        with open(path, encoding="utf-8") as file:
            return json.load(file)
    except OSError as error:
        raise ConfigurationError(f"Unable to read {path}: {error.strerror}") from error
    except json.JSONDecodeError as error:
        raise ConfigurationError(f"{path} is not valid JSON: {error}") from error


def load_run_config(path: Path | str) -> RunConfig:
    return RunConfig.from_dict(read_json(path))


def load_population_config(path: Path | str) -> PopulationConfig:
    return PopulationConfig.from_dict(read_json(path))
