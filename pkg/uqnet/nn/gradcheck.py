"""
Finite-difference verification of the analytic gradients
"""
from __future__ import annotations

import logging
from typing import Dict, Optional

import numpy as np

from uqnet.nn.network import (
    ForwardMode,
    NetworkSpec,
    ParamSet,
    backward,
    cast_params,
    compute_loss,
    forward,
    trainable_names,
)

logger = logging.getLogger(__name__)

FLOOR = 1e-8


def gradient_errors(
    net: NetworkSpec,
    params: ParamSet,
    batch: np.ndarray,
    labels: np.ndarray,
    eps: float = 1e-6,
    rng: Optional[np.random.Generator] = None,
    kl_weight: float = 0.0,
    norm: bool = False,
) -> Dict[str, float]:
    """
    Relative error of the analytic gradient of every trainable parameter tensor,
    the largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over its
    elements, where numeric is the central difference of compute_loss.

    With norm=True the tensor-level ratio
    ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8) is reported instead.

    Runs in float64 and in train mode; the noise realization of the first
    forward is replayed by every perturbed forward.
    """
    params = cast_params(params, np.float64)
    batch = np.asarray(batch, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    rng = rng if rng is not None else np.random.default_rng(0)

    outputs, cache = forward(net, params, batch, ForwardMode.TRAIN, rng=rng)
    analytic = backward(net, params, cache, labels, kl_weight=kl_weight)
    pinned = cache.noise

    def loss_at(candidate: ParamSet) -> float:
        out, replay = forward(net, candidate, batch, ForwardMode.TRAIN, noise=pinned)
        return compute_loss(net, out, labels, replay, kl_weight=kl_weight)

    errors = {}
    for name in trainable_names(net, params):
        numeric = np.zeros_like(params[name])
        flat = params[name].reshape(-1)
        numeric_flat = numeric.reshape(-1)
        for index in range(flat.size):
            original = flat[index]
            flat[index] = original + eps
            plus = loss_at(params)
            flat[index] = original - eps
            minus = loss_at(params)
            flat[index] = original
            numeric_flat[index] = (plus - minus) / (2.0 * eps)
        errors[name] = _norm_error(analytic[name], numeric) if norm else _max_error(analytic[name], numeric)
        logger.debug("Gradient check %s: relative error %.3e", name, errors[name])
    return errors


def _max_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), FLOOR)
    return float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0


def _norm_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), FLOOR)
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(
    net: NetworkSpec,
    params: ParamSet,
    batch: np.ndarray,
    labels: np.ndarray,
    eps: float = 1e-6,
    rng: Optional[np.random.Generator] = None,
    kl_weight: float = 0.0,
) -> float:
    """
    :return: max relative error over every individual parameter, see gradient_errors
    """
    errors = gradient_errors(net, params, batch, labels, eps=eps, rng=rng, kl_weight=kl_weight)
    return max(errors.values()) if errors else 0.0
