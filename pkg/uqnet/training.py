"""
Adam training with early stopping, and the per-method training dispatcher
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Tuple

import numpy as np

from uqnet.config import METHOD_VARIANTS, METHODS, RunConfig, TrainingConfig
from uqnet.data.epochs import EpochSet
from uqnet.errors import ConfigurationError, DataError
from uqnet.inference import Ensemble, Model, StochasticModel
from uqnet.nn.builder import STOCHASTIC_VARIANTS, build_shallow_convnet
from uqnet.nn.network import (
    ForwardMode,
    NetworkSpec,
    ParamSet,
    backward,
    compute_loss,
    forward,
    init_params,
    trainable_names,
)
from uqnet.nn.optim import AdamState, adam_step
from uqnet.utils.methods import PURPOSE_INIT, PURPOSE_NOISE, PURPOSE_SHUFFLE, derive_rng

if TYPE_CHECKING:
    from uqnet.evaluation.split import Split

logger = logging.getLogger(__name__)

EVAL_CHUNK = 64


@dataclass
class TrainingResult:
    """
    Outcome of one network's training run

    :param best_epoch: epoch whose parameters were restored (1-based)
    """

    params: ParamSet
    seed: int
    best_epoch: int
    epochs_run: int
    best_loss: float
    history: List[Tuple[float, float]] = field(default_factory=list)  # (train loss, monitored loss) per epoch

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "best_loss": self.best_loss,
        }


def evaluation_loss(net: NetworkSpec, params: ParamSet, epochs: EpochSet) -> float:
    """Data loss of a point forward, averaged over every trial"""
    total = 0.0
    labels = np.eye(net.classes)[epochs.labels]
    for start in range(0, len(epochs), EVAL_CHUNK):
        stop = start + EVAL_CHUNK
        outputs, _ = forward(net, params, epochs.data[start:stop], ForwardMode.POINT)
        total += compute_loss(net, outputs, labels[start:stop]) * len(outputs)
    return total / len(epochs)


def train_network(
    net: NetworkSpec,
    train: EpochSet,
    validation: Optional[EpochSet],
    config: TrainingConfig = TrainingConfig(),
    seed: int = 0,
    kl_weight: float = 0.0,
) -> TrainingResult:
    """
    Minibatch Adam on train, early stopping on the validation loss with
    config.patience, best parameters restored at the end.

    Initialization, shuffling and layer noise draw from independent streams
    derived from seed. Without validation trials the training loss is monitored.

    :raises DataError: if train is empty
    """
    if len(train) == 0:
        raise DataError("Cannot train on an empty set")
    dtype = np.dtype(config.dtype)
    init_rng = derive_rng(seed, PURPOSE_INIT)
    shuffle_rng = derive_rng(seed, PURPOSE_SHUFFLE)
    noise_rng = derive_rng(seed, PURPOSE_NOISE)

    params = init_params(net, init_rng, dtype=dtype)
    names = trainable_names(net, params)
    state = AdamState.for_params(
        {name: params[name] for name in names},
        lr=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.epsilon,
    )
    data = train.data.astype(dtype)
    labels = np.eye(net.classes, dtype=dtype)[train.labels]
    monitor = validation if validation is not None and len(validation) else None
    if monitor is None:
        logger.warning("No validation trials, early stopping monitors the training loss of %s", net.variant)

    best_params, best_loss, best_epoch, wait = params, np.inf, 0, 0
    history: List[Tuple[float, float]] = []
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(train))
        losses = []
        for start in range(0, len(order), config.batch_size):
            index = order[start:start + config.batch_size]
            outputs, cache = forward(net, params, data[index], ForwardMode.TRAIN, rng=noise_rng)
            losses.append(compute_loss(net, outputs, labels[index], cache, kl_weight=kl_weight))
            grads = backward(net, params, cache, labels[index], kl_weight=kl_weight)
            params, state = adam_step(params, grads, state)
            params.update({name: value.astype(dtype) for name, value in cache.state_updates.items()})

        train_loss = float(np.mean(losses))
        monitored = evaluation_loss(net, params, monitor if monitor is not None else train)
        history.append((train_loss, monitored))
        logger.debug("%s epoch %s: train loss %.5f, monitored loss %.5f", net.variant, epoch, train_loss, monitored)
        if monitored < best_loss:
            best_params, best_loss, best_epoch, wait = dict(params), monitored, epoch, 0
        else:
            wait += 1
            if wait >= config.patience:
                logger.info("Early stopping %s at epoch %s, restoring epoch %s", net.variant, epoch, best_epoch)
                break

    return TrainingResult(
        params=best_params,
        seed=seed,
        best_epoch=best_epoch,
        epochs_run=epoch,
        best_loss=float(best_loss),
        history=history,
    )


def fit_method(
    method: str, split: "Split", config: RunConfig, rng: np.random.Generator
) -> Tuple[Model, List[TrainingResult]]:
    """
    Train one method on split.train, early stopping on split.validation

    Every trained network gets its own seed drawn from rng; ensembles draw
    ensemble_size of them, so members differ in initialization and shuffle order.

    :return: (model or ensemble, one TrainingResult per trained network)
    :raises ConfigurationError: on an unknown method
    :raises DataError: on an empty training split
    """
    if method not in METHODS:
        raise ConfigurationError(f"Unknown method {method!r}, expected one of {', '.join(METHODS)}")
    if len(split.train) == 0:
        raise DataError(f"Training split of held-out subject {split.held_out_subject} is empty")
    variant = METHOD_VARIANTS[method]
    net = build_shallow_convnet(
        variant, split.train.channels, split.train.timesteps, split.train.classes, config.architecture
    )
    kl_weight = 1.0 / len(split.train) if variant == "flipout" else 0.0
    count = config.ensemble_size if method == "ensembles" else 1
    seeds = [int(seed) for seed in rng.integers(0, 2**63, size=count)]

    results = []
    for member, seed in enumerate(seeds):
        result = train_network(net, split.train, split.validation, config.training, seed=seed, kl_weight=kl_weight)
        logger.debug("Trained %s network %s/%s (best epoch %s)", method, member + 1, count, result.best_epoch)
        results.append(result)

    if method == "ensembles":
        members = tuple(StochasticModel(net, result.params, variant) for result in results)
        return Ensemble(members, tuple(seeds)), results
    passes = config.passes if variant in STOCHASTIC_VARIANTS else 1
    return StochasticModel(net, results[0].params, variant, passes), results


def train_method(method: str, split: "Split", config: RunConfig, rng: np.random.Generator) -> Model:
    return fit_method(method, split, config, rng)[0]
