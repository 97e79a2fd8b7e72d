import numpy as np
import pytest

from uqnet.config import DataSource, PopulationConfig, RunConfig, ShallowConvNetConfig, TrainingConfig
from uqnet.data.synthetic import synthesize_population

# Reduced Shallow ConvNet for C=3, S=60 inputs
SMALL_ARCH = ShallowConvNetConfig(
    filters=4,
    temporal_kernel=5,
    pool=10,
    pool_stride=5,
    flipout_hidden=4,
    duq_hidden=8,
    centroid_dim=8,
)
CHANNELS = 3
TIMESTEPS = 60
CLASSES = 4


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def small_arch():
    return SMALL_ARCH


@pytest.fixture
def batch(rng):
    return rng.standard_normal((6, CHANNELS, TIMESTEPS))


@pytest.fixture
def one_hot(rng):
    return np.eye(CLASSES)[rng.integers(0, CLASSES, size=6)]


@pytest.fixture
def population_config():
    return PopulationConfig(
        subjects=3,
        trials_per_class=8,
        channels=CHANNELS,
        timesteps=TIMESTEPS,
        classes=CLASSES,
        sampling_rate=120.0,
        sources=4,
        seed=7,
    )


@pytest.fixture
def population(population_config):
    return synthesize_population(population_config)


@pytest.fixture
def run_config(population_config, tmp_path):
    return RunConfig(
        data=DataSource(synthetic=population_config),
        methods=("dropout", "mc_dropout", "duq"),
        passes=3,
        ensemble_size=2,
        training=TrainingConfig(learning_rate=1e-3, batch_size=16, max_epochs=2, patience=1),
        architecture=SMALL_ARCH,
        seed=11,
        output_dir=str(tmp_path / "run"),
        coverages=(0.5, 1.0),
    )
