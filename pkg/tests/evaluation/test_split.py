import numpy as np
import pytest

from uqnet.config import PopulationConfig
from uqnet.data.epochs import EpochSet
from uqnet.data.synthetic import synthesize_population
from uqnet.errors import ConfigurationError, DataError
from uqnet.evaluation.split import PARTS, loso_partition


@pytest.fixture(scope="module")
def competition():
    # competition layout on a tiny signal: 9 subjects x 72 trials per class
    config = PopulationConfig(subjects=9, trials_per_class=72, channels=1, timesteps=2, sources=1, seed=5)
    return synthesize_population(config)


class TestLOSOPartition:
    def test_sizes(self, competition):
        split = loso_partition(competition, 3, rng=np.random.default_rng(0))
        assert split.sizes() == {
            "train": 1872,
            "validation": 208,
            "within_population": 224,
            "cross_population": 288,
        }
        for subject in competition.subjects():
            if subject != 3:
                assert np.sum(split.within_population.subject_ids == subject) == 28

    def test_disjoint_cover(self, competition):
        split = loso_partition(competition, 1, rng=np.random.default_rng(1))
        parts = [split.indices[part] for part in PARTS]
        joined = np.concatenate(parts)
        assert len(joined) == len(competition)
        np.testing.assert_array_equal(np.sort(joined), np.arange(len(competition)))

    def test_held_out_subject_only_in_cross(self, competition):
        split = loso_partition(competition, 9, rng=np.random.default_rng(2))
        assert set(split.cross_population.subject_ids.tolist()) == {9}
        for part in ("train", "validation", "within_population"):
            assert 9 not in getattr(split, part).subject_ids

    def test_stratified(self, competition):
        split = loso_partition(competition, 2, rng=np.random.default_rng(3))
        for part in ("train", "validation", "within_population"):
            counts = np.bincount(getattr(split, part).labels, minlength=4)
            assert len(set(counts.tolist())) == 1

    def test_seeded(self, competition):
        first = loso_partition(competition, 4, rng=np.random.default_rng(9))
        second = loso_partition(competition, 4, rng=np.random.default_rng(9))
        other = loso_partition(competition, 4, rng=np.random.default_rng(10))
        for part in PARTS:
            np.testing.assert_array_equal(first.indices[part], second.indices[part])
        assert not np.array_equal(first.indices["train"], other.indices["train"])

    def test_small_classes_still_contribute(self):
        data = EpochSet(
            data=np.zeros((6, 1, 2)),
            labels=[0, 1, 0, 0, 1, 1],
            subject_ids=[1, 1, 2, 2, 2, 2],
            sampling_rate=250.0,
            channel_names=("a",),
        )
        split = loso_partition(data, 2)
        # one trial per class: nothing withheld
        assert split.sizes()["within_population"] == 0
        assert split.sizes()["cross_population"] == 4

    def test_errors(self, competition):
        with pytest.raises(DataError):
            loso_partition(competition, 42)
        single = competition.subset(np.flatnonzero(competition.subject_ids == 1))
        with pytest.raises(DataError):
            loso_partition(single, 1)
        with pytest.raises(ConfigurationError):
            loso_partition(competition, 1, within_frac=0.0)
        with pytest.raises(ConfigurationError):
            loso_partition(competition, 1, val_frac=1.0)

    def test_missing_class(self):
        data = EpochSet(
            data=np.zeros((5, 1, 2)),
            labels=[0, 1, 0, 0, 1],
            subject_ids=[1, 1, 2, 2, 3],
            sampling_rate=250.0,
            channel_names=("a",),
        )
        with pytest.raises(DataError, match="class 1"):
            loso_partition(data, 3)
