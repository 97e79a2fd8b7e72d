"""
Shallow ConvNet and its per-method variants
"""
from __future__ import annotations

import logging
from typing import List

from uqnet.config import ShallowConvNetConfig
from uqnet.errors import ConfigurationError
from uqnet.nn import layers as L
from uqnet.nn.layers import LayerSpec
from uqnet.nn.network import NetworkSpec

logger = logging.getLogger(__name__)

VARIANTS = (
    "dropout",
    "mc_dropout",
    "dropconnect",
    "mc_dropconnect",
    "flipout",
    "ensemble_member",
    "duq",
)
# Variants whose noise layers stay on at inference
STOCHASTIC_VARIANTS = ("mc_dropout", "mc_dropconnect", "flipout")


def build_shallow_convnet(
    variant: str,
    channels: int,
    timesteps: int,
    classes: int,
    arch: ShallowConvNetConfig = ShallowConvNetConfig(),
) -> NetworkSpec:
    """
    temporal conv -> spatial conv -> batchnorm -> square -> avgpool -> log -> tail

    Both convolutions are bias-free since the batchnorm that follows absorbs any shift.
    """
    if variant not in VARIANTS:
        raise ConfigurationError(f"Unknown network variant {variant!r}, expected one of {', '.join(VARIANTS)}")

    trunk: List[LayerSpec] = [
        L.conv2d("temporal_conv", arch.filters, (1, arch.temporal_kernel), use_bias=False),
        L.conv2d("spatial_conv", arch.filters, (channels, 1), use_bias=False),
    ]
    if variant in ("dropconnect", "mc_dropconnect"):
        trunk.append(L.dropconnect("spatial_dropconnect", arch.dropconnect_rate))
    trunk += [
        L.batchnorm("batchnorm", momentum=arch.bn_momentum, eps=arch.bn_eps),
        L.square("square"),
        L.avgpool("avgpool", (1, arch.pool), (1, arch.pool_stride)),
        L.log("log"),
    ]

    loss = "categorical_ce"
    if variant in ("dropout", "mc_dropout", "ensemble_member"):
        tail = [
            L.dropout("dropout", arch.dropout_rate),
            L.dense("classifier", classes),
            L.softmax(),
        ]
    elif variant in ("dropconnect", "mc_dropconnect"):
        tail = [L.dense("classifier", classes), L.softmax()]
    elif variant == "flipout":
        tail = [
            L.dense("hidden", arch.flipout_hidden, activation="relu"),
            L.flipout_dense("flipout_hidden", arch.flipout_hidden, activation="relu"),
            L.flipout_dense("flipout_classifier", classes),
            L.softmax(),
        ]
    else:
        tail = [
            L.dense("hidden", arch.duq_hidden, activation="relu"),
            L.rbf("rbf", classes, arch.centroid_dim, arch.length_scale),
        ]
        loss = "binary_ce"

    net = NetworkSpec(
        layers=tuple(trunk + tail),
        channels=channels,
        timesteps=timesteps,
        classes=classes,
        loss=loss,
        variant=variant,
    )
    logger.debug("Built %s network with output shapes %s", variant, net.shapes())
    return net
