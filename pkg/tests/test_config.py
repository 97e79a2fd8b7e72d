import json
from pathlib import Path

import pytest

from uqnet.config import (
    METHODS,
    DataSource,
    PopulationConfig,
    RunConfig,
    ShallowConvNetConfig,
    TrainingConfig,
    load_population_config,
    load_run_config,
    validate_seed,
)
from uqnet.errors import ConfigurationError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig.from_dict({"data": {"synthetic": {}}})
        assert config.methods == METHODS
        assert config.passes == 50
        assert config.ensemble_size == 10
        assert config.coverages == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
        assert config.training == TrainingConfig()
        assert config.architecture == ShallowConvNetConfig()
        assert config.data.synthetic == PopulationConfig()

    def test_round_trip(self, run_config):
        assert RunConfig.from_dict(json.loads(json.dumps(run_config.to_dict()))) == run_config

    @pytest.mark.parametrize(
        "changes",
        [
            {"learning_rate": 1e-3},
            {"training": {"momentum": 0.9}},
            {"methods": ["svm"]},
            {"methods": ["dropout", "dropout"]},
            {"methods": "dropout"},
            {"methods": []},
            {"passes": 0},
            {"ensemble_size": 1},
            {"seed": -1},
            {"seed": 2**64},
            {"seed": True},
            {"coverages": [0.0, 1.0]},
            {"coverages": [1.5]},
            {"data": {}},
            {"data": {"path": "x.epoc", "synthetic": {}}},
            {"data": {"synthetic": {"subjects": 300}}},
            {"data": {"synthetic": {"amplitude_jitter": -0.1}}},
            {"architecture": {"dropout_rate": 1.0}},
            {"split": {"within_frac": 0.0}},
            {"training": {"dtype": "float16"}},
        ],
    )
    def test_rejects(self, changes):
        with pytest.raises(ConfigurationError):
            RunConfig.from_dict({"data": {"synthetic": {}}, **changes})

    def test_needs_data(self):
        with pytest.raises(ConfigurationError):
            RunConfig.from_dict({"seed": 1})
        with pytest.raises(ConfigurationError):
            RunConfig.from_dict([])

    def test_with_seed(self, run_config):
        assert run_config.with_seed(2**64 - 1).seed == 2**64 - 1
        with pytest.raises(ConfigurationError):
            run_config.with_seed(-5)


class TestDocuments:
    def test_invalid_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            load_run_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_population_config(tmp_path / "absent.json")

    @pytest.mark.parametrize("name", ["benchmark.json", "full.json"])
    def test_committed_run_configs(self, name):
        config = load_run_config(CONFIGS / name)
        assert config.methods == METHODS
        assert config.data.synthetic is not None

    def test_committed_population(self):
        population = load_population_config(CONFIGS / "population.json")
        assert population == load_run_config(CONFIGS / "benchmark.json").data.synthetic

    def test_full_scale(self):
        config = load_run_config(CONFIGS / "full.json")
        assert (config.data.synthetic.channels, config.data.synthetic.timesteps) == (22, 1125)
        assert config.architecture == ShallowConvNetConfig()
        assert config.training == TrainingConfig()


class TestSeeds:
    def test_u64_range(self):
        assert validate_seed(0) == 0
        assert validate_seed(2**64 - 1) == 2**64 - 1
        with pytest.raises(ConfigurationError):
            validate_seed(1.5)

    def test_data_source_exclusive(self):
        with pytest.raises(ConfigurationError):
            DataSource()
