"""
Layer kinds of the network core

Every kind has a forward and a backward function working on numpy arrays.
Activations are either 4D ``(N, F, H, W)`` inside the convolutional trunk or
2D ``(N, D)`` after the first dense layer, which flattens its input.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from uqnet.errors import ConfigurationError, DimensionError

logger = logging.getLogger(__name__)

LAYER_KINDS = (
    "conv2d",
    "dense",
    "batchnorm",
    "square",
    "log",
    "avgpool",
    "dropout",
    "dropconnect",
    "flipout_dense",
    "rbf",
    "softmax",
)
HEAD_KINDS = ("softmax", "rbf")
ACTIVATIONS = ("linear", "relu")
# Kinds whose weights a following dropconnect layer masks
MASKABLE_KINDS = ("conv2d", "dense")

LOG_FLOOR = 1e-6
FLIPOUT_MU_STD = 0.05
FLIPOUT_SIGMA_INIT = 0.02
CENTROID_STD = 0.05

Shape = Tuple[int, ...]


@dataclass(frozen=True)
class LayerSpec:
    """
    One layer of a network

    :param units: filters (conv2d), output units (dense, flipout_dense) or classes (rbf)
    :param kernel: convolution kernel or pooling window (rows, cols)
    :param stride: pooling stride
    :param rate: drop rate of dropout / dropconnect
    :param length_scale: RBF length scale sigma
    :param centroid_dim: RBF projection / centroid dimension
    """

    kind: str
    name: str
    units: int = 0
    kernel: Tuple[int, int] = (1, 1)
    stride: Tuple[int, int] = (1, 1)
    rate: float = 0.0
    activation: str = "linear"
    use_bias: bool = True
    length_scale: float = 0.0
    centroid_dim: int = 0
    momentum: float = 0.1
    eps: float = 1e-5

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigurationError(f"Unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"{self.name}: unknown activation {self.activation!r}")
        if self.kind in ("conv2d", "dense", "flipout_dense", "rbf") and self.units < 1:
            raise ConfigurationError(f"{self.name}: units must be positive")
        if self.kind in ("conv2d", "avgpool") and min(self.kernel) < 1:
            raise ConfigurationError(f"{self.name}: kernel dims must be positive")
        if self.kind == "avgpool" and min(self.stride) < 1:
            raise ConfigurationError(f"{self.name}: stride must be positive")
        if self.kind in ("dropout", "dropconnect") and not 0 <= self.rate < 1:
            raise ConfigurationError(f"{self.name}: drop rate must be in [0, 1), got {self.rate}")
        if self.kind == "rbf":
            if not self.length_scale > 0:
                raise ConfigurationError(f"{self.name}: length scale must be > 0")
            if self.centroid_dim < 1:
                raise ConfigurationError(f"{self.name}: centroid_dim must be positive")

    @property
    def is_head(self) -> bool:
        return self.kind in HEAD_KINDS


# Layer constructors used by the builder and the tests


def conv2d(name: str, filters: int, kernel: Tuple[int, int], use_bias: bool = True) -> LayerSpec:
    return LayerSpec("conv2d", name, units=filters, kernel=tuple(kernel), use_bias=use_bias)


def dense(name: str, units: int, activation: str = "linear") -> LayerSpec:
    return LayerSpec("dense", name, units=units, activation=activation)


def batchnorm(name: str, momentum: float = 0.1, eps: float = 1e-5) -> LayerSpec:
    return LayerSpec("batchnorm", name, momentum=momentum, eps=eps)


def square(name: str) -> LayerSpec:
    return LayerSpec("square", name)


def log(name: str) -> LayerSpec:
    return LayerSpec("log", name)


def avgpool(name: str, pool: Tuple[int, int], stride: Tuple[int, int]) -> LayerSpec:
    return LayerSpec("avgpool", name, kernel=tuple(pool), stride=tuple(stride))


def dropout(name: str, rate: float) -> LayerSpec:
    return LayerSpec("dropout", name, rate=rate)


def dropconnect(name: str, rate: float) -> LayerSpec:
    return LayerSpec("dropconnect", name, rate=rate)


def flipout_dense(name: str, units: int, activation: str = "linear") -> LayerSpec:
    return LayerSpec("flipout_dense", name, units=units, activation=activation)


def rbf(name: str, classes: int, centroid_dim: int, length_scale: float) -> LayerSpec:
    return LayerSpec("rbf", name, units=classes, centroid_dim=centroid_dim, length_scale=length_scale)


def softmax(name: str = "softmax") -> LayerSpec:
    return LayerSpec("softmax", name)


def output_shape(spec: LayerSpec, in_shape: Shape) -> Shape:
    """
    Per-example output shape of a layer

    :raises DimensionError: when the layer cannot consume in_shape
    """
    if spec.kind == "conv2d":
        if len(in_shape) != 3:
            raise DimensionError(f"{spec.name}: conv2d needs (F, H, W) input, got {in_shape}")
        _, height, width = in_shape
        out_h, out_w = height - spec.kernel[0] + 1, width - spec.kernel[1] + 1
        if out_h < 1 or out_w < 1:
            raise DimensionError(f"{spec.name}: kernel {spec.kernel} larger than input {in_shape[1:]}")
        return spec.units, out_h, out_w
    if spec.kind == "avgpool":
        if len(in_shape) != 3:
            raise DimensionError(f"{spec.name}: avgpool needs (F, H, W) input, got {in_shape}")
        channels, height, width = in_shape
        if height < spec.kernel[0] or width < spec.kernel[1]:
            raise DimensionError(f"{spec.name}: pool {spec.kernel} larger than input {in_shape[1:]}")
        return (
            channels,
            (height - spec.kernel[0]) // spec.stride[0] + 1,
            (width - spec.kernel[1]) // spec.stride[1] + 1,
        )
    if spec.kind in ("dense", "flipout_dense", "rbf"):
        return (spec.units,)
    return tuple(in_shape)


def _glorot_uniform(rng: np.random.Generator, shape: Shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_layer(spec: LayerSpec, in_shape: Shape, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """
    Initial parameters of one layer, keyed by local parameter name (float64)
    """
    if spec.kind == "conv2d":
        in_channels = in_shape[0]
        kh, kw = spec.kernel
        params = {
            "weight": _glorot_uniform(
                rng, (spec.units, in_channels, kh, kw), in_channels * kh * kw, spec.units * kh * kw
            )
        }
        if spec.use_bias:
            params["bias"] = np.zeros(spec.units)
        return params
    if spec.kind == "dense":
        fan_in = int(np.prod(in_shape))
        return {
            "weight": _glorot_uniform(rng, (fan_in, spec.units), fan_in, spec.units),
            "bias": np.zeros(spec.units),
        }
    if spec.kind == "batchnorm":
        features = in_shape[0]
        return {
            "gamma": np.ones(features),
            "beta": np.zeros(features),
            "running_mean": np.zeros(features),
            "running_var": np.ones(features),
        }
    if spec.kind == "flipout_dense":
        fan_in = int(np.prod(in_shape))
        rho = math.log(math.expm1(FLIPOUT_SIGMA_INIT))
        return {
            "weight_mu": rng.normal(0.0, FLIPOUT_MU_STD, size=(fan_in, spec.units)),
            "weight_rho": np.full((fan_in, spec.units), rho),
            "bias_mu": np.zeros(spec.units),
            "bias_rho": np.full(spec.units, rho),
        }
    if spec.kind == "rbf":
        features = int(np.prod(in_shape))
        return {
            "projection": rng.normal(0.0, 1.0 / math.sqrt(features), size=(spec.units, spec.centroid_dim, features)),
            "centroids": rng.normal(0.0, CENTROID_STD, size=(spec.units, spec.centroid_dim)),
        }
    return {}


NON_TRAINABLE = ("running_mean", "running_var")


# Helpers


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    return np.maximum(z, 0.0) if activation == "relu" else z


def _activation_grad(dy: np.ndarray, z: np.ndarray, activation: str) -> np.ndarray:
    return dy * (z > 0) if activation == "relu" else dy


def sample_mask(rng: np.random.Generator, shape: Shape, rate: float, dtype) -> np.ndarray:
    """Inverted-dropout mask: kept entries scaled by 1 / (1 - rate)"""
    keep = rng.random(shape) >= rate
    return keep.astype(dtype) / np.asarray(1.0 - rate, dtype=dtype)


def sample_signs(rng: np.random.Generator, shape: Shape, dtype) -> np.ndarray:
    return (rng.integers(0, 2, size=shape) * 2 - 1).astype(dtype)


# conv2d (valid, stride 1)


def conv2d_forward(x: np.ndarray, weight: np.ndarray, bias: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    windows = sliding_window_view(x, weight.shape[2:], axis=(2, 3))
    y = np.einsum("nchwij,fcij->nfhw", windows, weight, optimize=True)
    if bias is not None:
        y = y + bias[None, :, None, None]
    return y, windows


def conv2d_backward(
    dy: np.ndarray, x_shape: Shape, windows: np.ndarray, weight: np.ndarray, need_input_grad: bool = True
) -> Tuple[Optional[np.ndarray], np.ndarray, np.ndarray]:
    """
    :return: (dx, dweight, dbias)
    """
    dweight = np.einsum("nchwij,nfhw->fcij", windows, dy, optimize=True)
    dbias = dy.sum(axis=(0, 2, 3))
    if not need_input_grad:
        return None, dweight, dbias
    dx = np.zeros(x_shape, dtype=dy.dtype)
    out_h, out_w = dy.shape[2:]
    for i in range(weight.shape[2]):
        for j in range(weight.shape[3]):
            dx[:, :, i:i + out_h, j:j + out_w] += np.einsum("nfhw,fc->nchw", dy, weight[:, :, i, j], optimize=True)
    return dx, dweight, dbias


# dense


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, activation: str) -> Tuple[np.ndarray, dict]:
    flat = x.reshape(x.shape[0], -1)
    z = flat @ weight + bias
    return _activate(z, activation), {"flat": flat, "z": z}


def dense_backward(
    dy: np.ndarray, cache: dict, weight: np.ndarray, x_shape: Shape, activation: str
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    dz = _activation_grad(dy, cache["z"], activation)
    dweight = cache["flat"].T @ dz
    dbias = dz.sum(axis=0)
    dx = (dz @ weight.T).reshape(x_shape)
    return dx, dweight, dbias


# batchnorm over the feature axis (axis 1)


def _reduce_axes(x: np.ndarray) -> Tuple[int, ...]:
    return (0,) + tuple(range(2, x.ndim))


def _broadcast(v: np.ndarray, ndim: int) -> np.ndarray:
    return v.reshape((1, -1) + (1,) * (ndim - 2))


def batchnorm_forward(
    x: np.ndarray, params: Dict[str, np.ndarray], spec: LayerSpec, training: bool
) -> Tuple[np.ndarray, dict, Dict[str, np.ndarray]]:
    """
    :return: (y, cache, running statistic updates); updates are empty outside training
    """
    axes = _reduce_axes(x)
    if training:
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        count = x.size // x.shape[1]
        unbiased = var * count / (count - 1) if count > 1 else var
        updates = {
            "running_mean": (1 - spec.momentum) * params["running_mean"] + spec.momentum * mean,
            "running_var": (1 - spec.momentum) * params["running_var"] + spec.momentum * unbiased,
        }
    else:
        mean, var, updates = params["running_mean"], params["running_var"], {}
    inv_std = 1.0 / np.sqrt(var + spec.eps)
    x_hat = (x - _broadcast(mean, x.ndim)) * _broadcast(inv_std, x.ndim)
    y = x_hat * _broadcast(params["gamma"], x.ndim) + _broadcast(params["beta"], x.ndim)
    return y, {"x_hat": x_hat, "inv_std": inv_std, "training": training}, updates


def batchnorm_backward(dy: np.ndarray, cache: dict, gamma: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    axes = _reduce_axes(dy)
    x_hat, inv_std = cache["x_hat"], cache["inv_std"]
    dgamma = (dy * x_hat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dx_hat = dy * _broadcast(gamma, dy.ndim)
    if not cache["training"]:
        return dx_hat * _broadcast(inv_std, dy.ndim), dgamma, dbeta
    count = dy.size // dy.shape[1]
    dx = (
        count * dx_hat
        - dx_hat.sum(axis=axes, keepdims=True)
        - x_hat * (dx_hat * x_hat).sum(axis=axes, keepdims=True)
    ) * (_broadcast(inv_std, dy.ndim) / count)
    return dx, dgamma, dbeta


# avgpool


def avgpool_forward(x: np.ndarray, pool: Tuple[int, int], stride: Tuple[int, int]) -> np.ndarray:
    windows = sliding_window_view(x, pool, axis=(2, 3))[:, :, :: stride[0], :: stride[1]]
    return windows.mean(axis=(-2, -1))


def avgpool_backward(dy: np.ndarray, x_shape: Shape, pool: Tuple[int, int], stride: Tuple[int, int]) -> np.ndarray:
    dx = np.zeros(x_shape, dtype=dy.dtype)
    scaled = dy / (pool[0] * pool[1])
    out_h, out_w = dy.shape[2:]
    for i in range(pool[0]):
        for j in range(pool[1]):
            dx[:, :, i:i + stride[0] * (out_h - 1) + 1:stride[0], j:j + stride[1] * (out_w - 1) + 1:stride[1]] += scaled
    return dx


# elementwise


def square_forward(x: np.ndarray) -> np.ndarray:
    return x * x


def square_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    return 2.0 * x * dy


def log_forward(x: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(x, LOG_FLOOR))


def log_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    above = x > LOG_FLOOR
    return np.where(above, dy / np.where(above, x, 1.0), 0.0).astype(dy.dtype)


def softmax_forward(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


# flipout dense


def flipout_dense_forward(
    x: np.ndarray,
    weight_mu: np.ndarray,
    weight_rho: np.ndarray,
    bias_mu: np.ndarray,
    bias_rho: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[Dict[str, np.ndarray]] = None,
    activation: str = "linear",
) -> Tuple[np.ndarray, dict]:
    """
    Flipout estimator of a mean-field Gaussian dense layer.

    y_n = x_n mu + ((x_n * s_n) (sigma * E)) * r_n + b with one standard normal
    perturbation E per batch and random sign vectors s_n, r_n per example.
    Without rng and noise the layer is deterministic: y = x mu + bias_mu.

    :param noise: pinned realization {"E", "eps_bias", "s", "r"}, overrides rng
    :return: (activated output, cache including the noise used)
    """
    flat = x.reshape(x.shape[0], -1)
    if noise is None and rng is None:
        z = flat @ weight_mu + bias_mu
        return _activate(z, activation), {"flat": flat, "z": z, "noise": None}

    dtype = flat.dtype
    if noise is None:
        noise = {
            "E": rng.standard_normal(weight_mu.shape).astype(dtype),
            "eps_bias": rng.standard_normal(bias_mu.shape).astype(dtype),
            "s": sample_signs(rng, flat.shape, dtype),
            "r": sample_signs(rng, (flat.shape[0], weight_mu.shape[1]), dtype),
        }
    perturbation = softplus(weight_rho) * noise["E"]
    bias = bias_mu + softplus(bias_rho) * noise["eps_bias"]
    z = flat @ weight_mu + ((flat * noise["s"]) @ perturbation) * noise["r"] + bias
    return _activate(z, activation), {"flat": flat, "z": z, "noise": noise, "perturbation": perturbation}


def flipout_dense_backward(
    dy: np.ndarray, cache: dict, params: Dict[str, np.ndarray], x_shape: Shape, activation: str
) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    dz = _activation_grad(dy, cache["z"], activation)
    flat = cache["flat"]
    grads = {"weight_mu": flat.T @ dz, "bias_mu": dz.sum(axis=0)}
    dx = dz @ params["weight_mu"].T
    noise = cache["noise"]
    if noise is None:
        grads["weight_rho"] = np.zeros_like(params["weight_rho"])
        grads["bias_rho"] = np.zeros_like(params["bias_rho"])
    else:
        dz_r = dz * noise["r"]
        dperturbation = (flat * noise["s"]).T @ dz_r
        grads["weight_rho"] = dperturbation * noise["E"] * expit(params["weight_rho"])
        grads["bias_rho"] = grads["bias_mu"] * noise["eps_bias"] * expit(params["bias_rho"])
        dx = dx + (dz_r @ cache["perturbation"].T) * noise["s"]
    return dx.reshape(x_shape), grads


# rbf head


def rbf_forward(
    features: np.ndarray, projection: np.ndarray, centroids: np.ndarray, length_scale: float
) -> Tuple[np.ndarray, dict]:
    """
    K_c(x) = exp(-(1/m) * ||W_c f(x) - e_c||^2 / (2 sigma^2)), values in (0, 1]

    :param features: (N, n)
    :param projection: (K, m, n) per-class projections W_c
    :param centroids: (K, m) class centroids e_c
    """
    if not length_scale > 0:
        raise ConfigurationError("length scale must be > 0")
    flat = features.reshape(features.shape[0], -1)
    diff = np.einsum("kmn,bn->bkm", projection, flat, optimize=True) - centroids[None, :, :]
    distance = (diff * diff).sum(axis=2) / centroids.shape[1]
    kernel = np.exp(-distance / (2.0 * length_scale**2))
    return kernel, {"flat": flat, "diff": diff, "kernel": kernel}


def rbf_backward(
    dy: np.ndarray, cache: dict, projection: np.ndarray, length_scale: float, x_shape: Shape
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    :return: (dx, dprojection, dcentroids)
    """
    centroid_dim = projection.shape[1]
    ddistance = dy * cache["kernel"] * (-1.0 / (2.0 * length_scale**2))
    ddiff = ddistance[:, :, None] * cache["diff"] * (2.0 / centroid_dim)
    dprojection = np.einsum("bkm,bn->kmn", ddiff, cache["flat"], optimize=True)
    dcentroids = -ddiff.sum(axis=0)
    dx = np.einsum("bkm,kmn->bn", ddiff, projection, optimize=True).reshape(x_shape)
    return dx, dprojection, dcentroids

