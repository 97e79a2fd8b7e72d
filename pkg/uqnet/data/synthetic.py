"""
Synthetic multi-subject motor imagery population

Every class drives a fixed set of band-limited sources with its own amplitude
profile. Subjects see those sources through their own mixing matrix, a shared
base matrix plus a Gaussian perturbation, which is what makes an unseen
subject harder than held-out trials of a known one. A log-normal jitter on
every trial's source amplitudes lets classes overlap even for a perfect
classifier.
"""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from uqnet.config import PopulationConfig
from uqnet.data.epochs import EpochSet

logger = logging.getLogger(__name__)

# Sources oscillate at evenly spaced frequencies over the mu/beta band
BAND = (8.0, 30.0)
HIGH_AMPLITUDE = 1.0
LOW_AMPLITUDE = 0.2


def class_amplitudes(classes: int, sources: int) -> np.ndarray:
    """
    (classes, sources) amplitude profile: class k drives the sources j with j % classes == k
    """
    owner = np.arange(sources)[None, :] % classes == np.arange(classes)[:, None]
    return np.where(owner, HIGH_AMPLITUDE, LOW_AMPLITUDE)


def channel_names(channels: int) -> tuple:
    return tuple(f"EEG{index + 1:02d}" for index in range(channels))


def synthesize_population(config: PopulationConfig, rng: Optional[np.random.Generator] = None) -> EpochSet:
    """
    Generate ``config.subjects`` subjects with ``config.trials_per_class`` trials per class

    :param rng: generator to draw from, defaults to one seeded with config.seed
    :return: EpochSet with subject ids 1..subjects, classes interleaved within each subject
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    time = np.arange(config.timesteps) / config.sampling_rate
    frequencies = np.linspace(BAND[0], BAND[1], config.sources)
    amplitudes = class_amplitudes(config.classes, config.sources)
    scale = 1.0 / np.sqrt(config.sources)
    base = rng.standard_normal((config.channels, config.sources)) * scale
    labels = np.tile(np.arange(config.classes), config.trials_per_class)

    data, all_labels, subject_ids = [], [], []
    for subject in range(1, config.subjects + 1):
        mixing = base + config.mixing_scale * rng.standard_normal(base.shape) * scale
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(len(labels), config.sources))
        angles = 2.0 * np.pi * frequencies[None, :, None] * time[None, None, :] + phases[:, :, None]
        gains = amplitudes[labels]
        if config.amplitude_jitter > 0:
            gains = gains * rng.lognormal(0.0, config.amplitude_jitter, size=gains.shape)
        sources = gains[:, :, None] * np.sin(angles)
        trials = np.einsum("cs,nst->nct", mixing, sources, optimize=True)
        if config.noise_scale > 0:
            trials = trials + config.noise_scale * rng.standard_normal(trials.shape)
        data.append(trials.astype(np.float32))
        all_labels.append(labels)
        subject_ids.append(np.full(len(labels), subject))
        logger.debug("Synthesized subject %s: %s trials", subject, len(labels))

    epochs = EpochSet(
        data=np.concatenate(data),
        labels=np.concatenate(all_labels),
        subject_ids=np.concatenate(subject_ids),
        sampling_rate=config.sampling_rate,
        channel_names=channel_names(config.channels),
        classes=config.classes,
    )
    logger.info(
        "Synthesized %s subjects x %s trials (%s channels, %s timesteps)",
        config.subjects,
        len(labels),
        config.channels,
        config.timesteps,
    )
    return epochs
