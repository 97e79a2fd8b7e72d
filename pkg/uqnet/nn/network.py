"""
Network topology, parameters, forward and backward passes
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from uqnet.errors import ConfigurationError, DimensionError, NumericError, StateError
from uqnet.nn import bayes
from uqnet.nn import layers as L
from uqnet.nn.layers import LayerSpec

logger = logging.getLogger(__name__)

LOSSES = ("categorical_ce", "binary_ce")
PROB_FLOOR = 1e-12

ParamSet = Dict[str, np.ndarray]


class ForwardMode(str, Enum):
    """
    train: noise layers sample, batchnorm uses batch statistics
    point: no randomness at all
    stochastic: noise layers sample, batchnorm uses running statistics
    """

    TRAIN = "train"
    POINT = "point"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class NetworkSpec:
    """
    Ordered layers plus the input/output contract of a network
    """

    layers: Tuple[LayerSpec, ...]
    channels: int
    timesteps: int
    classes: int
    loss: str = "categorical_ce"
    variant: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.channels < 1 or self.timesteps < 1 or self.classes < 2:
            raise ConfigurationError("channels and timesteps must be positive, classes >= 2")
        if self.loss not in LOSSES:
            raise ConfigurationError(f"Unknown loss {self.loss!r}")
        heads = [index for index, spec in enumerate(self.layers) if spec.is_head]
        if len(heads) != 1 or heads[0] != len(self.layers) - 1:
            raise ConfigurationError("A network needs exactly one output head (softmax or rbf) as its last layer")
        if (self.head.kind == "rbf") != (self.loss == "binary_ce"):
            raise ConfigurationError("rbf head and binary_ce loss go together")
        names = [spec.name for spec in self.layers]
        if len(set(names)) != len(names):
            raise ConfigurationError("Layer names must be unique")
        for index, spec in enumerate(self.layers):
            if spec.kind == "dropconnect" and (index == 0 or self.layers[index - 1].kind not in L.MASKABLE_KINDS):
                raise ConfigurationError(f"{spec.name}: dropconnect must follow a conv2d or dense layer")
        if self.shapes()[-1] != (self.classes,):
            raise DimensionError(f"Network output {self.shapes()[-1]} does not match {self.classes} classes")

    @property
    def head(self) -> LayerSpec:
        return self.layers[-1]

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        return 1, self.channels, self.timesteps

    def shapes(self) -> List[Tuple[int, ...]]:
        """
        Per-example output shape after every layer

        :raises DimensionError: when consecutive layers do not chain
        """
        shape: Tuple[int, ...] = self.input_shape
        result = []
        for spec in self.layers:
            shape = L.output_shape(spec, shape)
            result.append(shape)
        return result

    def input_shapes(self) -> List[Tuple[int, ...]]:
        return [self.input_shape] + self.shapes()[:-1]

    def weight_drop_rates(self) -> Dict[str, float]:
        """Dropconnect rate applied to each masked layer's weights"""
        rates = {}
        for index, spec in enumerate(self.layers):
            if spec.kind == "dropconnect":
                rates[self.layers[index - 1].name] = spec.rate
        return rates

    @property
    def has_noise_layers(self) -> bool:
        return any(
            (spec.kind in ("dropout", "dropconnect") and spec.rate > 0) or spec.kind == "flipout_dense"
            for spec in self.layers
        )

    def to_dict(self) -> dict:
        layers = []
        for spec in self.layers:
            layer = asdict(spec)
            layer["kernel"], layer["stride"] = list(spec.kernel), list(spec.stride)
            layers.append(layer)
        return {
            "layers": layers,
            "channels": self.channels,
            "timesteps": self.timesteps,
            "classes": self.classes,
            "loss": self.loss,
            "variant": self.variant,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkSpec":
        """
        :raises ConfigurationError: on unknown layer fields or an inconsistent topology
        """
        try:
            layers = tuple(
                LayerSpec(**{**layer, "kernel": tuple(layer["kernel"]), "stride": tuple(layer["stride"])})
                for layer in data["layers"]
            )
            return cls(
                layers=layers,
                channels=data["channels"],
                timesteps=data["timesteps"],
                classes=data["classes"],
                loss=data["loss"],
                variant=data["variant"],
            )
        except (KeyError, TypeError) as error:
            raise ConfigurationError(f"Malformed network description: {error}") from error


def init_params(net: NetworkSpec, rng: np.random.Generator, dtype=np.float32) -> ParamSet:
    """
    Fresh parameters for net, keyed ``"<layer>.<param>"``
    """
    params: ParamSet = {}
    for spec, in_shape in zip(net.layers, net.input_shapes()):
        for local, value in L.init_layer(spec, in_shape, rng).items():
            params[f"{spec.name}.{local}"] = np.asarray(value, dtype=dtype)
    return params


def trainable_names(net: NetworkSpec, params: ParamSet) -> List[str]:
    return [name for name in params if name.rsplit(".", 1)[1] not in L.NON_TRAINABLE]


def cast_params(params: ParamSet, dtype) -> ParamSet:
    return {name: value.astype(dtype) for name, value in params.items()}


def _local(params: ParamSet, spec: LayerSpec) -> Dict[str, np.ndarray]:
    prefix = f"{spec.name}."
    return {name[len(prefix):]: value for name, value in params.items() if name.startswith(prefix)}


@dataclass
class ForwardCache:
    """
    Everything backward needs from one forward call

    noise holds the random realization of every noise layer so the same
    forward can be replayed exactly; state_updates holds new batchnorm
    running statistics (train mode only), applied by the caller.
    """

    net: NetworkSpec
    mode: ForwardMode
    shapes: Dict[str, Tuple[int, ...]]
    entries: List[dict] = field(default_factory=list)
    noise: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)
    state_updates: ParamSet = field(default_factory=dict)
    kl: float = 0.0
    kl_grads: ParamSet = field(default_factory=dict)
    outputs: Optional[np.ndarray] = None


def _check_finite(value: np.ndarray, spec: LayerSpec) -> None:
    if not np.all(np.isfinite(value)):
        raise NumericError(spec.name)


def forward(
    net: NetworkSpec,
    params: ParamSet,
    batch: np.ndarray,
    mode: ForwardMode | str = ForwardMode.POINT,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[Dict[str, Dict[str, np.ndarray]]] = None,
    prior: bayes.MixturePrior = bayes.DEFAULT_PRIOR,
) -> Tuple[np.ndarray, ForwardCache]:
    """
    Run batch (N, C, S) through net

    :param noise: pinned realization from a previous cache; layers found in it
        replay that noise instead of drawing from rng
    :return: (outputs (N, K), cache for backward)
    """
    mode = ForwardMode(mode)
    noise = noise or {}
    if mode is not ForwardMode.POINT and rng is None and not noise and net.has_noise_layers:
        raise ConfigurationError(f"{mode.value} mode needs a random generator")
    batch = np.asarray(batch)
    if batch.ndim != 3 or batch.shape[1:] != (net.channels, net.timesteps):
        raise DimensionError(f"Batch shape {batch.shape} does not match network input (N, {net.channels}, {net.timesteps})")
    if batch.shape[0] < 1:
        raise DimensionError("Empty batch")
    sample = mode is not ForwardMode.POINT
    dtype = next(iter(params.values())).dtype if params else np.float64
    x = batch.astype(dtype, copy=False)[:, None, :, :]
    drop_rates = net.weight_drop_rates()

    cache = ForwardCache(net=net, mode=mode, shapes={name: value.shape for name, value in params.items()})
    for spec in net.layers:
        local = _local(params, spec)
        layer_noise = noise.get(spec.name)
        entry: dict = {"x_shape": x.shape}
        if spec.kind == "conv2d" or spec.kind == "dense":
            weight = local["weight"]
            rate = drop_rates.get(spec.name, 0.0)
            if sample and rate > 0:
                mask = layer_noise["mask"] if layer_noise else L.sample_mask(rng, weight.shape, rate, dtype)
                cache.noise[spec.name] = {"mask": mask}
                entry["mask"] = mask
                weight = weight * mask
            entry["weight"] = weight
            if spec.kind == "conv2d":
                x, entry["windows"] = L.conv2d_forward(x, weight, local.get("bias"))
            else:
                x, entry["dense"] = L.dense_forward(x, weight, local["bias"], spec.activation)
        elif spec.kind == "batchnorm":
            x, entry["bn"], updates = L.batchnorm_forward(x, local, spec, training=mode is ForwardMode.TRAIN)
            for local_name, value in updates.items():
                cache.state_updates[f"{spec.name}.{local_name}"] = value
        elif spec.kind == "square":
            entry["x"] = x
            x = L.square_forward(x)
        elif spec.kind == "log":
            entry["x"] = x
            x = L.log_forward(x)
        elif spec.kind == "avgpool":
            x = L.avgpool_forward(x, spec.kernel, spec.stride)
        elif spec.kind == "dropout":
            if sample and spec.rate > 0:
                mask = layer_noise["mask"] if layer_noise else L.sample_mask(rng, x.shape, spec.rate, dtype)
                cache.noise[spec.name] = {"mask": mask}
                entry["mask"] = mask
                x = x * mask
        elif spec.kind == "dropconnect":
            pass
        elif spec.kind == "flipout_dense":
            x, entry["flipout"] = L.flipout_dense_forward(
                x,
                local["weight_mu"],
                local["weight_rho"],
                local["bias_mu"],
                local["bias_rho"],
                rng=rng if sample else None,
                noise=layer_noise if sample else None,
                activation=spec.activation,
            )
            layer_noise = entry["flipout"]["noise"]
            if layer_noise is not None:
                cache.noise[spec.name] = layer_noise
                if mode is ForwardMode.TRAIN:
                    _add_kl(cache, spec, local, layer_noise, prior)
        elif spec.kind == "rbf":
            x, entry["rbf"] = L.rbf_forward(x, local["projection"], local["centroids"], spec.length_scale)
        elif spec.kind == "softmax":
            x = L.softmax_forward(x.reshape(x.shape[0], -1))
            entry["y"] = x
        _check_finite(x, spec)
        cache.entries.append(entry)

    cache.outputs = x
    return x, cache


def _add_kl(
    cache: ForwardCache, spec: LayerSpec, local: Dict[str, np.ndarray], noise: Dict[str, np.ndarray], prior
) -> None:
    """KL sample of a flipout layer at the weights its forward used"""
    for mu_name, rho_name, eps_name in (("weight_mu", "weight_rho", "E"), ("bias_mu", "bias_rho", "eps_bias")):
        value, dmu, drho = bayes.kl_sample_and_grad(local[mu_name], local[rho_name], noise[eps_name], prior)
        cache.kl += value
        cache.kl_grads[f"{spec.name}.{mu_name}"] = dmu
        cache.kl_grads[f"{spec.name}.{rho_name}"] = drho


def compute_loss(
    net: NetworkSpec, outputs: np.ndarray, labels: np.ndarray, cache: Optional[ForwardCache] = None, kl_weight: float = 0.0
) -> float:
    """
    Batch-averaged data loss plus kl_weight times the KL sample of the cache

    :param labels: one-hot (N, K)
    """
    outputs = np.asarray(outputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if outputs.shape != labels.shape:
        raise DimensionError(f"Labels {labels.shape} do not match outputs {outputs.shape}")
    if net.loss == "categorical_ce":
        data_loss = -np.sum(labels * np.log(np.clip(outputs, PROB_FLOOR, 1.0))) / outputs.shape[0]
    else:
        data_loss = -np.mean(
            labels * np.log(np.clip(outputs, PROB_FLOOR, 1.0))
            + (1.0 - labels) * np.log(np.clip(1.0 - outputs, PROB_FLOOR, 1.0))
        )
    kl = cache.kl if cache is not None else 0.0
    return float(data_loss + kl_weight * kl)


def _output_grad(net: NetworkSpec, outputs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """
    Gradient of the data loss at the head input (softmax) or head output (rbf)
    """
    count = outputs.shape[0]
    if net.loss == "categorical_ce":
        return (outputs - labels) / count
    log_pos = outputs > PROB_FLOOR
    log_neg = (1.0 - outputs) > PROB_FLOOR
    grad = np.where(log_pos, -labels / np.where(log_pos, outputs, 1.0), 0.0) + np.where(
        log_neg, (1.0 - labels) / np.where(log_neg, 1.0 - outputs, 1.0), 0.0
    )
    return (grad / outputs.size).astype(outputs.dtype)


def backward(
    net: NetworkSpec, params: ParamSet, cache: ForwardCache, labels: np.ndarray, kl_weight: float = 0.0
) -> ParamSet:
    """
    Gradient of compute_loss with respect to every trainable parameter

    :raises StateError: if cache was produced by another network or parameter layout
    """
    if cache.net != net or cache.outputs is None or len(cache.entries) != len(net.layers):
        raise StateError("Cache was not produced by this network")
    if {name: value.shape for name, value in params.items()} != cache.shapes:
        raise StateError("Parameters do not match the cached forward pass")
    labels = np.asarray(labels, dtype=cache.outputs.dtype)
    if labels.shape != cache.outputs.shape:
        raise DimensionError(f"Labels {labels.shape} do not match outputs {cache.outputs.shape}")

    grads: ParamSet = {}
    dy = _output_grad(net, cache.outputs, labels)
    layers_backward = list(zip(net.layers, cache.entries))
    for index in range(len(layers_backward) - 1, -1, -1):
        spec, entry = layers_backward[index]
        local = _local(params, spec)
        x_shape = entry["x_shape"]
        if spec.kind == "softmax":
            # fused with categorical cross-entropy in _output_grad
            dy = dy.reshape(x_shape)
        elif spec.kind == "rbf":
            dy, grads[f"{spec.name}.projection"], grads[f"{spec.name}.centroids"] = L.rbf_backward(
                dy, entry["rbf"], local["projection"], spec.length_scale, x_shape
            )
        elif spec.kind == "flipout_dense":
            dy, layer_grads = L.flipout_dense_backward(dy, entry["flipout"], local, x_shape, spec.activation)
            for local_name, value in layer_grads.items():
                grads[f"{spec.name}.{local_name}"] = value
        elif spec.kind in ("conv2d", "dense"):
            if spec.kind == "conv2d":
                dx, dweight, dbias = L.conv2d_backward(dy, x_shape, entry["windows"], entry["weight"], need_input_grad=index > 0)
            else:
                dx, dweight, dbias = L.dense_backward(dy, entry["dense"], entry["weight"], x_shape, spec.activation)
            if "mask" in entry:
                dweight = dweight * entry["mask"]
            grads[f"{spec.name}.weight"] = dweight
            if f"{spec.name}.bias" in params:
                grads[f"{spec.name}.bias"] = dbias
            dy = dx
        elif spec.kind == "batchnorm":
            dy, grads[f"{spec.name}.gamma"], grads[f"{spec.name}.beta"] = L.batchnorm_backward(dy, entry["bn"], local["gamma"])
        elif spec.kind == "square":
            dy = L.square_backward(dy, entry["x"])
        elif spec.kind == "log":
            dy = L.log_backward(dy, entry["x"])
        elif spec.kind == "avgpool":
            dy = L.avgpool_backward(dy, x_shape, spec.kernel, spec.stride)
        elif spec.kind == "dropout":
            if "mask" in entry:
                dy = dy * entry["mask"]
        if dy is None:
            break

    if kl_weight:
        for name, value in cache.kl_grads.items():
            grads[name] = grads[name] + kl_weight * value
    return {name: np.asarray(grads[name], dtype=params[name].dtype) for name in trainable_names(net, params)}
