"""
Leave-one-subject-out partition with a within-population holdout
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from uqnet.data.epochs import EpochSet
from uqnet.errors import ConfigurationError, DataError

logger = logging.getLogger(__name__)

PARTS = ("train", "validation", "within_population", "cross_population")


@dataclass(frozen=True, eq=False)
class Split:
    """
    Four disjoint trial sets of one LOSO fold

    :param indices: trial indices into the partitioned EpochSet, per part
    """

    train: EpochSet
    validation: EpochSet
    within_population: EpochSet
    cross_population: EpochSet
    held_out_subject: int
    indices: Dict[str, np.ndarray]

    def sizes(self) -> Dict[str, int]:
        return {part: len(self.indices[part]) for part in PARTS}


def _holdout_count(count: int, fraction: float) -> int:
    """floor(fraction * count), but at least 1 whenever count >= 2"""
    taken = math.floor(fraction * count)
    if taken == 0 and count >= 2:
        taken = 1
    return taken


def _stratified(
    indices: np.ndarray, labels: np.ndarray, fraction: float, rng: np.random.Generator
) -> Tuple[List[int], List[int]]:
    """
    :return: (held out, rest), drawn per class
    """
    held, rest = [], []
    for label in np.unique(labels[indices]):
        members = rng.permutation(indices[labels[indices] == label])
        taken = _holdout_count(len(members), fraction)
        held.extend(members[:taken].tolist())
        rest.extend(members[taken:].tolist())
    return held, rest


def loso_partition(
    data: EpochSet,
    held_out_subject: int,
    within_frac: float = 0.10,
    val_frac: float = 0.10,
    rng: Optional[np.random.Generator] = None,
) -> Split:
    """
    The held-out subject becomes the cross-population set. From every other
    subject, within_frac of each class goes to the within-population set; the
    remainder is split (1 - val_frac) / val_frac into train and validation,
    stratified by class.

    :raises DataError: if the subject is absent, fewer than 2 subjects exist, or
        a remaining subject lacks trials of some class
    """
    for name, fraction in (("within_frac", within_frac), ("val_frac", val_frac)):
        if not 0 < fraction < 1:
            raise ConfigurationError(f"{name} must be in (0, 1), got {fraction}")
    rng = rng if rng is not None else np.random.default_rng(0)
    subjects = data.subjects()
    if held_out_subject not in subjects:
        raise DataError(f"Subject {held_out_subject} is not in the data set (subjects: {subjects})")
    if len(subjects) < 2:
        raise DataError("Leave-one-subject-out needs at least 2 subjects")

    everything = np.arange(len(data))
    cross = everything[data.subject_ids == held_out_subject]
    within: List[int] = []
    remainder: List[int] = []
    for subject in subjects:
        if subject == held_out_subject:
            continue
        own = everything[data.subject_ids == subject]
        for label in range(data.classes):
            if not np.any(data.labels[own] == label):
                raise DataError(f"Subject {subject} has no trials of class {label}")
        held, rest = _stratified(own, data.labels, within_frac, rng)
        within.extend(held)
        remainder.extend(rest)

    validation, train = _stratified(np.asarray(remainder, dtype=np.int64), data.labels, val_frac, rng)
    indices = {
        "train": np.sort(np.asarray(train, dtype=np.int64)),
        "validation": np.sort(np.asarray(validation, dtype=np.int64)),
        "within_population": np.sort(np.asarray(within, dtype=np.int64)),
        "cross_population": cross,
    }
    split = Split(
        train=data.subset(indices["train"]),
        validation=data.subset(indices["validation"]),
        within_population=data.subset(indices["within_population"]),
        cross_population=data.subset(indices["cross_population"]),
        held_out_subject=int(held_out_subject),
        indices=indices,
    )
    logger.debug("Subject %s split sizes: %s", held_out_subject, split.sizes())
    return split
