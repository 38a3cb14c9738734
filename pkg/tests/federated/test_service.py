import numpy as np
import pandas as pd
import pytest

from fedcache.common.exceptions import ConfigurationError
from fedcache.diffusion import build_schedule
from fedcache.federated import ClientState, aggregate, local_train, run_training, write_round_reports


def test_rounds_are_reported(clients, global_model, config):
    model, reports = run_training(clients, config, global_model)

    assert [report.round for report in reports] == [1, 2]
    assert reports[-1].checksum == model.params.checksum()
    assert all(len(report.client_losses) == 3 for report in reports)


def test_single_round_equals_manual_protocol(clients, global_model, config):
    config = config.model_copy(update={"rounds": 1})
    schedule = build_schedule(10)
    uploads = [
        (local_train(client, global_model, config, schedule, round_index=1)[0], client.data_size)
        for client in clients
    ]
    expected = aggregate(global_model.params, uploads)

    model, _ = run_training(clients, config, global_model)

    assert model.params.equals(expected)


def test_result_does_not_depend_on_workers(clients, global_model, config):
    serial, _ = run_training(clients, config, global_model)
    parallel, _ = run_training(clients, config.model_copy(update={"workers": 3}), global_model)

    assert serial.params.equals(parallel.params)


def test_zero_rounds_return_the_initial_model(clients, global_model, config):
    model, reports = run_training(clients, config.model_copy(update={"rounds": 0}), global_model)

    assert reports == []
    assert model.params.equals(global_model.params)


def test_empty_clients_are_skipped(clients, global_model, config):
    empty = ClientState(client_id=3, local_latents=np.zeros((0, 4)), data_size=0)
    with_empty, reports = run_training([*clients, empty], config, global_model)
    without, _ = run_training(clients, config, global_model)

    assert with_empty.params.equals(without.params)
    assert len(reports[0].client_losses) == 3


def test_training_needs_data(global_model, config):
    empty = ClientState(client_id=0, local_latents=np.zeros((0, 4)), data_size=0)

    with pytest.raises(ConfigurationError):
        run_training([empty], config, global_model)


def test_write_round_reports(clients, global_model, config, tmp_path):
    _, reports = run_training(clients, config, global_model)
    path = tmp_path / "rounds.csv"
    write_round_reports(path, reports)

    frame = pd.read_csv(path)
    assert list(frame.columns) == ["round", "client_mean_loss", "seconds", "checksum"]
    assert frame["round"].tolist() == [1, 2]
