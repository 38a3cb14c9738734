import pathlib

import pytest

from fedcache.common.exceptions import ConfigurationError, DataError
from fedcache.federated import AggregationMode
from fedcache.settings import ExperimentConfig, load_config


def write(tmp_path: pathlib.Path, text: str) -> pathlib.Path:
    path = tmp_path / "experiment.conf"
    path.write_text(text)
    return path


def test_empty_file_gives_defaults(tmp_path: pathlib.Path):
    config = load_config(write(tmp_path, ""))

    assert (config.T, config.I, config.N, config.U, config.e) == (50, 20, 100, 1000, 30)
    assert config.eta_d == 0.0006
    assert config.F == 3952
    assert config.capacities == list(range(50, 501, 50))
    assert config.aggregation_mode is AggregationMode.FEDAVG


def test_values_comments_and_lists(tmp_path: pathlib.Path):
    config = load_config(write(tmp_path, "\n".join([
        "# comment",
        "eta_d = 0.0006",
        "capacities = 10, 20 , 30  # trailing comment",
        "policies = oracle, random",
        "latent_standardize = false",
        "aggregation_mode = literal-eq9",
    ])))

    assert config.eta_d == 0.0006
    assert config.capacities == [10, 20, 30]
    assert config.policies == ["oracle", "random"]
    assert config.latent_standardize is False
    assert config.aggregation_mode is AggregationMode.LITERAL


@pytest.mark.parametrize(("text", "fragments"), (
    ("T = 0", ("`T`", "line 1")),
    ("\nunknown = 3", ("`unknown`", "line 2")),
    ("seed = -1", ("`seed`",)),
    ("capacities = 100, 50", ("`capacities`",)),
    ("policies = lru", ("`policies`",)),
    ("d_hit = 60", ("d_hit",)),
    ("T = 5\nT = 6", ("`T`", "line 2")),
    ("just text", ("Line 1",)),
    ("latent_dim = 10", ("latent_dim",)),
))
def test_invalid_configuration(tmp_path: pathlib.Path, text: str, fragments: tuple[str, ...]):
    with pytest.raises(ConfigurationError) as exc_info:
        load_config(write(tmp_path, text))

    for fragment in fragments:
        assert fragment in str(exc_info.value)


def test_missing_file(tmp_path: pathlib.Path):
    with pytest.raises(DataError):
        load_config(tmp_path / "missing.conf")


def test_derived_settings():
    config = ExperimentConfig(I=5, R_max=3, seed=4, d_hit=5.0, d_miss=20.0, ae_hidden=50)

    assert config.federation().clients == 5
    assert config.federation(rounds=1).rounds == 1
    assert config.split_plan().clients == 5
    assert config.split_plan().seed == 4
    assert config.delay_model().d_miss == 20.0
    assert config.autoencoder_settings().hidden == 50


def test_overrides_are_validated():
    config = ExperimentConfig()

    assert config.with_overrides(seed=9, workers=None).seed == 9
    with pytest.raises(ConfigurationError):
        config.with_overrides(T=0)
