"""
EpochSet and the EPOC file format

Layout (little-endian): magic ``EPOC``, version u16 = 1, header N u32, C u32,
S u32, K u16, sampling rate f32, C channel names (u16 length + UTF-8),
labels u8 x N, subject ids u8 x N, payload f32 x N*C*S (trial-major,
channel-second).
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from uqnet.errors import DataError, FormatError
from uqnet.utils.methods import atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b"EPOC"
VERSION = 1
_HEADER = struct.Struct("<IIIHf")


@dataclass(frozen=True)
class RecordingHeader:
    trials: int
    channels: int
    timesteps: int
    classes: int
    sampling_rate: float
    version: int = VERSION

    @property
    def payload_size(self) -> int:
        return self.trials * self.channels * self.timesteps * 4


@dataclass(frozen=True, eq=False)
class EpochSet:
    """
    N trials x C channels x S timesteps with labels and subject ids
    """

    data: np.ndarray
    labels: np.ndarray
    subject_ids: np.ndarray
    sampling_rate: float
    channel_names: Tuple[str, ...]
    classes: int = field(default=0)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        labels = np.asarray(self.labels, dtype=np.int64)
        subject_ids = np.asarray(self.subject_ids, dtype=np.int64)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "subject_ids", subject_ids)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        # stored as f32 on disk
        object.__setattr__(self, "sampling_rate", float(np.float32(self.sampling_rate)))
        if self.classes == 0:
            object.__setattr__(self, "classes", int(labels.max()) + 1 if labels.size else 0)

        if data.ndim != 3:
            raise DataError(f"Epoch data must be (N, C, S), got shape {data.shape}")
        if not (len(labels) == len(subject_ids) == data.shape[0]):
            raise DataError("data, labels and subject_ids disagree on the number of trials")
        if data.shape[1] != len(self.channel_names):
            raise DataError(f"{data.shape[1]} channels but {len(self.channel_names)} channel names")
        if labels.size and (labels.min() < 0 or labels.max() >= self.classes):
            raise DataError(f"Labels must lie in 0..{self.classes - 1}")
        if not self.sampling_rate > 0:
            raise DataError("sampling_rate must be > 0")

    def __len__(self) -> int:
        return int(self.data.shape[0])

    @property
    def channels(self) -> int:
        return int(self.data.shape[1])

    @property
    def timesteps(self) -> int:
        return int(self.data.shape[2])

    def subjects(self) -> List[int]:
        return sorted(int(subject) for subject in np.unique(self.subject_ids))

    def subset(self, indices: Sequence[int] | np.ndarray) -> "EpochSet":
        indices = np.asarray(indices, dtype=np.int64)
        return EpochSet(
            data=self.data[indices],
            labels=self.labels[indices],
            subject_ids=self.subject_ids[indices],
            sampling_rate=self.sampling_rate,
            channel_names=self.channel_names,
            classes=self.classes,
        )

    def one_hot(self) -> np.ndarray:
        return np.eye(self.classes, dtype=np.float32)[self.labels]

    def equals(self, other: "EpochSet") -> bool:
        return (
            np.array_equal(self.data, other.data)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.subject_ids, other.subject_ids)
            and self.sampling_rate == other.sampling_rate
            and self.channel_names == other.channel_names
            and self.classes == other.classes
        )


def encode_epochset(epochs: EpochSet) -> bytes:
    if epochs.classes > 0xFFFF:
        raise DataError("Too many classes for the EPOC header")
    if len(epochs) and (epochs.labels.max() > 255 or epochs.subject_ids.min() < 0 or epochs.subject_ids.max() > 255):
        raise DataError("Labels and subject ids must fit in a byte")
    chunks = [
        MAGIC,
        struct.pack("<H", VERSION),
        _HEADER.pack(len(epochs), epochs.channels, epochs.timesteps, epochs.classes, epochs.sampling_rate),
    ]
    for name in epochs.channel_names:
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
    chunks.append(epochs.labels.astype(np.uint8).tobytes())
    chunks.append(epochs.subject_ids.astype(np.uint8).tobytes())
    chunks.append(np.ascontiguousarray(epochs.data, dtype="<f4").tobytes())
    return b"".join(chunks)


def decode_epochset(payload: bytes) -> EpochSet:
    """
    :raises FormatError: on bad magic, version, truncation or length mismatch
    """
    if payload[:4] != MAGIC:
        raise FormatError("Not an EPOC file: bad magic", 0)
    offset = 4
    try:
        (version,) = struct.unpack_from("<H", payload, offset)
        if version != VERSION:
            raise FormatError(f"Unsupported EPOC version {version}", offset)
        offset += 2
        trials, channels, timesteps, classes, sampling_rate = _HEADER.unpack_from(payload, offset)
        offset += _HEADER.size
        header = RecordingHeader(trials, channels, timesteps, classes, float(sampling_rate), version)
        names = []
        for _ in range(channels):
            (length,) = struct.unpack_from("<H", payload, offset)
            offset += 2
            raw = payload[offset:offset + length]
            if len(raw) != length:
                raise FormatError("Truncated channel name block", offset)
            names.append(raw.decode("utf-8"))
            offset += length
    except struct.error as error:
        raise FormatError(f"Truncated header: {error}", offset) from error
    except UnicodeDecodeError as error:
        raise FormatError("Channel name is not UTF-8", offset) from error

    expected = offset + 2 * header.trials + header.payload_size
    if len(payload) != expected:
        raise FormatError(
            f"Payload length mismatch: header declares N*C*S = {header.trials}*{header.channels}*{header.timesteps}, "
            f"expected {expected} bytes, file has {len(payload)}",
            min(len(payload), expected),
        )
    labels = np.frombuffer(payload, dtype=np.uint8, count=trials, offset=offset)
    offset += trials
    subject_ids = np.frombuffer(payload, dtype=np.uint8, count=trials, offset=offset)
    offset += trials
    data = np.frombuffer(payload, dtype="<f4", count=trials * channels * timesteps, offset=offset)
    try:
        return EpochSet(
            data=data.reshape(trials, channels, timesteps).astype(np.float32),
            labels=labels.astype(np.int64),
            subject_ids=subject_ids.astype(np.int64),
            sampling_rate=header.sampling_rate,
            channel_names=tuple(names),
            classes=classes,
        )
    except DataError as error:
        raise FormatError(f"Inconsistent EPOC content: {error}", offset) from error


def save_epochset(path: Path | str, epochs: EpochSet) -> Path:
    path = atomic_write_bytes(path, encode_epochset(epochs))
    logger.info("Saved %s trials (%s x %s) to %s", len(epochs), epochs.channels, epochs.timesteps, path)
    return path


def load_epochset(path: Path | str) -> EpochSet:
    try:
        payload = Path(path).read_bytes()
    except OSError as error:
        raise FormatError(f"Unable to read {path}: {error.strerror}") from error
    epochs = decode_epochset(payload)
    logger.debug("Loaded %s trials from %s", len(epochs), path)
    return epochs
