"""
Preprocessing chain: drop EOG, volts to microvolts, exponential moving
standardization of the continuous signal, then epoching around the cue
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import pandas as pd

from uqnet.config import StandardizationConfig
from uqnet.data.epochs import EpochSet
from uqnet.errors import ConfigurationError, DataError

logger = logging.getLogger(__name__)

VOLTS_TO_MICROVOLTS = 1e6
# Trial timing relative to the trial start: cue at 2 s, trial end at 6 s,
# windows start 0.5 s before the cue
CUE_OFFSET = 2.0
PRE_CUE = 0.5
TRIAL_END = 6.0


@dataclass(frozen=True)
class TrialEvent:
    onset: int  # sample index of the trial start
    label: int


@dataclass(frozen=True, eq=False)
class RawRecording:
    """
    Continuous multichannel recording in volts

    :param channel_types: "eeg" or "eog" per channel
    """

    data: np.ndarray  # (channels, samples)
    sampling_rate: float
    channel_names: Tuple[str, ...]
    channel_types: Tuple[str, ...]
    subject_id: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise DataError(f"Recording must be (channels, samples), got {data.shape}")
        if not (data.shape[0] == len(self.channel_names) == len(self.channel_types)):
            raise DataError("Recording channels, names and types disagree")
        unknown = set(self.channel_types) - {"eeg", "eog"}
        if unknown:
            raise DataError(f"Unknown channel types: {', '.join(sorted(unknown))}")
        if not self.sampling_rate > 0:
            raise DataError("sampling_rate must be > 0")


def exponential_moving_standardize(
    signal: np.ndarray,
    factor_new: float = 1e-3,
    eps: float = 1e-4,
    init_block: int = 1000,
) -> np.ndarray:
    """
    Causal per-channel standardization

    m_t = f x_t + (1 - f) m_{t-1} and v_t = f (x_t - m_t)^2 + (1 - f) v_{t-1},
    output (x_t - m_t) / max(sqrt(v_t), eps). The recursion starts at m_0 = x_0,
    v_0 = 0, and the first init_block samples are instead standardized with the
    block's own mean and standard deviation.

    :param signal: (channels, samples)
    """
    if not 0 < factor_new < 1:
        raise ConfigurationError("factor_new must be in (0, 1)")
    if not eps > 0:
        raise ConfigurationError("eps must be > 0")
    signal = np.asarray(signal, dtype=np.float64)
    frame = pd.DataFrame(signal.T)
    mean = frame.ewm(alpha=factor_new, adjust=False).mean()
    demeaned = frame - mean
    variance = (demeaned * demeaned).ewm(alpha=factor_new, adjust=False).mean()
    standardized = (demeaned / np.maximum(eps, np.sqrt(variance))).to_numpy()

    if init_block:
        block = signal.T[:init_block]
        block_mean = block.mean(axis=0, keepdims=True)
        block_std = block.std(axis=0, keepdims=True)
        standardized[:init_block] = (block - block_mean) / np.maximum(eps, block_std)
    return standardized.T


def to_microvolts(signal: np.ndarray) -> np.ndarray:
    return np.asarray(signal, dtype=np.float64) * VOLTS_TO_MICROVOLTS


def epoch_windows(sampling_rate: float) -> Tuple[int, int]:
    """
    :return: (start, stop) sample offsets of the epoch window from the trial start
    """
    start = int(round((CUE_OFFSET - PRE_CUE) * sampling_rate))
    stop = int(round(TRIAL_END * sampling_rate))
    return start, stop


def preprocess(
    recording: RawRecording,
    events: Sequence[TrialEvent],
    classes: int = 4,
    standardization: StandardizationConfig = StandardizationConfig(),
) -> EpochSet:
    """
    Turn one continuous recording into an EpochSet of (N, EEG channels, S) trials

    :raises DataError: if a trial window exceeds the recording
    """
    eeg = [index for index, kind in enumerate(recording.channel_types) if kind == "eeg"]
    dropped = len(recording.channel_types) - len(eeg)
    logger.debug("Dropping %s EOG channels of subject %s", dropped, recording.subject_id)
    signal = to_microvolts(recording.data[eeg])
    signal = exponential_moving_standardize(
        signal,
        factor_new=standardization.factor_new,
        eps=standardization.eps,
        init_block=standardization.init_block,
    )

    start, stop = epoch_windows(recording.sampling_rate)
    total = signal.shape[1]
    trials = []
    for index, event in enumerate(events):
        first, last = event.onset + start, event.onset + stop
        if first < 0 or last > total:
            raise DataError(
                f"Trial {index} window [{first}, {last}) exceeds the recording of {total} samples"
            )
        trials.append(signal[:, first:last])

    data = np.stack(trials) if trials else np.zeros((0, len(eeg), stop - start))
    return EpochSet(
        data=data.astype(np.float32),
        labels=np.array([event.label for event in events], dtype=np.int64),
        subject_ids=np.full(len(events), recording.subject_id, dtype=np.int64),
        sampling_rate=recording.sampling_rate,
        channel_names=tuple(recording.channel_names[index] for index in eeg),
        classes=classes,
    )
