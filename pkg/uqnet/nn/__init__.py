"""Numpy network core: layers, losses, Adam and the Shallow ConvNet builder"""
from uqnet.nn.bayes import DEFAULT_PRIOR, MixturePrior, kl_mixture_mc, kl_mixture_samples
from uqnet.nn.builder import STOCHASTIC_VARIANTS, VARIANTS, build_shallow_convnet
from uqnet.nn.gradcheck import check_gradients, gradient_errors
from uqnet.nn.layers import LayerSpec, flipout_dense_forward, rbf_forward
from uqnet.nn.network import (
    ForwardCache,
    ForwardMode,
    NetworkSpec,
    ParamSet,
    backward,
    compute_loss,
    forward,
    init_params,
)
from uqnet.nn.optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "DEFAULT_PRIOR",
    "ForwardCache",
    "ForwardMode",
    "LayerSpec",
    "MixturePrior",
    "NetworkSpec",
    "ParamSet",
    "STOCHASTIC_VARIANTS",
    "VARIANTS",
    "adam_step",
    "backward",
    "build_shallow_convnet",
    "check_gradients",
    "compute_loss",
    "flipout_dense_forward",
    "forward",
    "gradient_errors",
    "init_params",
    "kl_mixture_mc",
    "kl_mixture_samples",
    "rbf_forward",
]
