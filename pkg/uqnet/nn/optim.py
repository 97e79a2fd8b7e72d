from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from uqnet.errors import DimensionError

ParamSet = Dict[str, np.ndarray]


@dataclass
class AdamState:
    """
    Bias-corrected Adam moments for every trained parameter
    """

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first: ParamSet = field(default_factory=dict)
    second: ParamSet = field(default_factory=dict)

    @classmethod
    def for_params(cls, grads_like: ParamSet, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            first={name: np.zeros_like(value) for name, value in grads_like.items()},
            second={name: np.zeros_like(value) for name, value in grads_like.items()},
        )


def adam_step(params: ParamSet, grads: ParamSet, state: AdamState) -> Tuple[ParamSet, AdamState]:
    """
    One Adam update of every parameter that has a gradient; others pass through

    :return: (new params, new state); inputs are not modified
    """
    first: ParamSet = dict(state.first)
    second: ParamSet = dict(state.second)
    step = state.step + 1
    correction1 = 1.0 - state.beta1**step
    correction2 = 1.0 - state.beta2**step
    updated = dict(params)
    for name, grad in grads.items():
        value = params[name]
        if grad.shape != value.shape:
            raise DimensionError(f"Gradient of {name} has shape {grad.shape}, parameter {value.shape}")
        m: Optional[np.ndarray] = state.first.get(name)
        v: Optional[np.ndarray] = state.second.get(name)
        m = np.zeros_like(value) if m is None else m
        v = np.zeros_like(value) if v is None else v
        if m.shape != value.shape or v.shape != value.shape:
            raise DimensionError(f"Adam state of {name} does not match its parameter")
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        updated[name] = (value - update).astype(value.dtype)
        first[name], second[name] = m, v
    new_state = AdamState(
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
        step=step,
        first=first,
        second=second,
    )
    return updated, new_state
