"""
Distributions over predictions: MC sampling, ensembles and the DUQ kernel head
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from uqnet.config import read_json
from uqnet.errors import ConfigurationError, DataError, DimensionError, FormatError
from uqnet.nn.builder import STOCHASTIC_VARIANTS
from uqnet.nn.checkpoint import load_params, save_params
from uqnet.nn.network import ForwardMode, NetworkSpec, ParamSet, forward, init_params
from uqnet.utils.methods import atomic_write_json

logger = logging.getLogger(__name__)

DEFAULT_PASSES = 50
SIMPLEX_TOLERANCE = 1e-6
# Trials per forward call at inference; bounds the memory of the conv trunk
INFERENCE_CHUNK = 64

MANIFEST = "manifest.json"
MODEL_FILE = "model.uqnn"


@dataclass(frozen=True, eq=False)
class PredictionSamples:
    """
    T forward passes x N trials x K class probabilities
    """

    probs: np.ndarray
    method: str = "custom"

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 3 or probs.shape[0] < 1:
            raise DimensionError(f"Samples must be (T, N, K) with T >= 1, got {probs.shape}")
        if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
            raise DataError("Probabilities must lie in [0, 1]")
        if probs.size and np.abs(probs.sum(axis=2) - 1.0).max() > SIMPLEX_TOLERANCE:
            raise DataError("Every pass must give a probability row that sums to 1")

    @property
    def passes(self) -> int:
        return int(self.probs.shape[0])

    @property
    def trials(self) -> int:
        return int(self.probs.shape[1])

    @property
    def classes(self) -> int:
        return int(self.probs.shape[2])


@dataclass(frozen=True, eq=False)
class StochasticModel:
    """
    A trained network and how to sample from it

    :param default_passes: T used when the caller gives none; 0 picks 50 for
        stochastic variants and 1 for everything else
    """

    net: NetworkSpec
    params: ParamSet
    variant: str
    default_passes: int = 0

    def __post_init__(self):
        if self.variant != self.net.variant:
            raise ConfigurationError(f"Model tagged {self.variant!r} holds a {self.net.variant!r} network")
        if self.default_passes == 0:
            object.__setattr__(self, "default_passes", DEFAULT_PASSES if self.stochastic else 1)
        if self.default_passes < 1:
            raise ConfigurationError("default_passes must be >= 1")

    @property
    def stochastic(self) -> bool:
        return self.variant in STOCHASTIC_VARIANTS

    @property
    def has_rbf_head(self) -> bool:
        return self.net.head.kind == "rbf"


@dataclass(frozen=True, eq=False)
class Ensemble:
    members: Tuple[StochasticModel, ...]
    seeds: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if not self.members:
            raise ConfigurationError("Ensemble has no members")
        if len(self.members) < 2:
            raise ConfigurationError("An ensemble needs at least 2 members")
        first = self.members[0].net
        if any(member.net != first for member in self.members[1:]):
            raise ConfigurationError("Ensemble members must share one topology")
        if self.seeds and len(self.seeds) != len(self.members):
            raise ConfigurationError("One seed per ensemble member")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def net(self) -> NetworkSpec:
        return self.members[0].net


Model = Union[StochasticModel, Ensemble]


def _chunked_forward(
    model: StochasticModel, batch: np.ndarray, mode: ForwardMode, rng: Optional[np.random.Generator]
) -> np.ndarray:
    outputs = []
    for start in range(0, len(batch), INFERENCE_CHUNK):
        out, _ = forward(model.net, model.params, batch[start:start + INFERENCE_CHUNK], mode, rng=rng)
        outputs.append(out)
    return np.concatenate(outputs)


def mc_sample_predictions(
    model: StochasticModel,
    batch: np.ndarray,
    passes: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> PredictionSamples:
    """
    Stack T forwards of batch. Stochastic variants sample their noise layers on
    every pass; any other variant gives T bitwise-equal point forwards.

    :raises ConfigurationError: if passes is 0 or the model has an rbf head
    """
    passes = model.default_passes if passes is None else passes
    if passes < 1:
        raise ConfigurationError(f"Need at least one forward pass, got {passes}")
    if model.has_rbf_head:
        raise ConfigurationError("DUQ models are scored with duq_predict")
    batch = np.asarray(batch)

    if not model.stochastic:
        point = _chunked_forward(model, batch, ForwardMode.POINT, None)
        return PredictionSamples(np.repeat(point[None], passes, axis=0), model.variant)

    if rng is None:
        raise ConfigurationError("Stochastic sampling needs a random generator")
    samples = np.stack([_chunked_forward(model, batch, ForwardMode.STOCHASTIC, rng) for _ in range(passes)])
    logger.debug("Sampled %s passes of %s on %s trials", passes, model.variant, len(batch))
    return PredictionSamples(samples, model.variant)


def ensemble_predictions(ensemble: Ensemble, batch: np.ndarray) -> PredictionSamples:
    """
    One point forward per member, slice t belongs to member t
    """
    batch = np.asarray(batch)
    samples = np.stack([_chunked_forward(member, batch, ForwardMode.POINT, None) for member in ensemble.members])
    return PredictionSamples(samples, "ensembles")


class DUQPrediction(NamedTuple):
    predicted: np.ndarray
    uncertainty: np.ndarray  # -max kernel, higher means reject first
    kernel: np.ndarray  # (N, K)


def duq_predict(model: StochasticModel, batch: np.ndarray) -> DUQPrediction:
    """
    Class of the closest centroid, and minus the largest kernel value as uncertainty

    :raises ConfigurationError: if the model has no rbf head
    """
    if not model.has_rbf_head:
        raise ConfigurationError(f"{model.variant} model has no rbf head")
    kernel = _chunked_forward(model, np.asarray(batch), ForwardMode.POINT, None).astype(np.float64)
    return DUQPrediction(
        predicted=np.argmax(kernel, axis=1),
        uncertainty=-kernel.max(axis=1),
        kernel=kernel,
    )


def predict_samples(
    model: Model, batch: np.ndarray, passes: int = DEFAULT_PASSES, rng: Optional[np.random.Generator] = None
) -> PredictionSamples:
    """
    Samples the way the harness scores each method: standard baselines take one
    point forward, stochastic variants take ``passes`` forwards, ensembles one per member
    """
    if isinstance(model, Ensemble):
        return ensemble_predictions(model, batch)
    if not model.stochastic:
        return mc_sample_predictions(model, batch, 1)
    return mc_sample_predictions(model, batch, passes, rng)


# checkpoints


def _model_manifest(model: StochasticModel, seed: Optional[int]) -> dict:
    return {
        "kind": "model",
        "variant": model.variant,
        "default_passes": model.default_passes,
        "seed": seed,
        "network": model.net.to_dict(),
    }


def save_model(directory: Path | str, model: StochasticModel, seed: Optional[int] = None) -> Path:
    directory = Path(directory)
    save_params(directory / MODEL_FILE, model.params)
    atomic_write_json(directory / MANIFEST, _model_manifest(model, seed))
    return directory


def _read_manifest(directory: Path) -> dict:
    path = directory / MANIFEST
    if not path.exists():
        raise FormatError(f"No checkpoint manifest in {directory}")
    manifest = read_json(path)
    if not isinstance(manifest, dict) or manifest.get("kind") not in ("model", "ensemble"):
        raise FormatError(f"{path} is not a checkpoint manifest")
    return manifest


def _restore(directory: Path, manifest: dict, file_name: str) -> StochasticModel:
    net = NetworkSpec.from_dict(manifest["network"])
    params = load_params(directory / file_name)
    expected = {name: value.shape for name, value in init_params(net, np.random.default_rng(0)).items()}
    found = {name: value.shape for name, value in params.items()}
    if expected != found:
        raise FormatError(f"{directory / file_name} does not match the {net.variant} network")
    return StochasticModel(net, params, manifest["variant"], manifest.get("default_passes", 0))


def load_model(directory: Path | str) -> StochasticModel:
    directory = Path(directory)
    manifest = _read_manifest(directory)
    if manifest["kind"] != "model":
        raise FormatError(f"{directory} holds an ensemble, not a single model")
    return _restore(directory, manifest, MODEL_FILE)


def save_ensemble(directory: Path | str, ensemble: Ensemble) -> Path:
    """
    One UQNN file per member plus a manifest with member count, seeds and variant
    """
    directory = Path(directory)
    files: List[str] = []
    for index, member in enumerate(ensemble.members):
        name = f"member_{index:02d}.uqnn"
        save_params(directory / name, member.params)
        files.append(name)
    atomic_write_json(
        directory / MANIFEST,
        {
            "kind": "ensemble",
            "members": len(ensemble),
            "files": files,
            "seeds": list(ensemble.seeds),
            "variant": ensemble.net.variant,
            "network": ensemble.net.to_dict(),
        },
    )
    return directory


def load_ensemble(directory: Path | str) -> Ensemble:
    directory = Path(directory)
    manifest = _read_manifest(directory)
    if manifest["kind"] != "ensemble":
        raise FormatError(f"{directory} holds a single model, not an ensemble")
    files: Sequence[str] = manifest.get("files", [])
    if len(files) != manifest.get("members"):
        raise FormatError(f"{directory / MANIFEST}: member count does not match the file list")
    members = tuple(_restore(directory, manifest, name) for name in files)
    return Ensemble(members, tuple(manifest.get("seeds", ())))


def load_checkpoint(directory: Path | str) -> Model:
    directory = Path(directory)
    if _read_manifest(directory)["kind"] == "ensemble":
        return load_ensemble(directory)
    return load_model(directory)


def save_checkpoint(directory: Path | str, model: Model, seed: Optional[int] = None) -> Path:
    if isinstance(model, Ensemble):
        return save_ensemble(directory, model)
    return save_model(directory, model, seed)
