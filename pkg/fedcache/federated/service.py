import math
import pathlib
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, computed_field

from fedcache.common.exceptions import ConfigurationError, EmptyClientError
from fedcache.diffusion import build_schedule
from fedcache.models import DenoiserModel

from .aggregation import aggregate
from .client import ClientState, local_train
from .settings import FederationConfig

ROUND_COLUMNS = ["round", "client_mean_loss", "seconds", "checksum"]


class RoundReport(BaseModel):
    """Outcome of one communication round.

    Attributes:
        round (int): 1-based round index.
        client_losses (list[float]): Mean local loss of every client that took part.
        seconds (float): Wall clock duration of the round.
        checksum (str): SHA-256 of the global model after aggregation.
    """
    round: int
    client_losses: list[float]
    seconds: float
    checksum: str

    @computed_field
    @property
    def client_mean_loss(self) -> float:
        finite = [loss for loss in self.client_losses if not math.isnan(loss)]
        return float(np.mean(finite)) if finite else math.nan


def run_training(
        clients: Sequence[ClientState],
        config: FederationConfig,
        global_model: DenoiserModel,
) -> tuple[DenoiserModel, list[RoundReport]]:
    """Run `config.rounds` rounds of federated training.

    Every round broadcasts the current global model, lets each client train its own copy (up to `config.workers`
    at a time), and aggregates the uploads weighted by data size. Clients without data are skipped with a warning.
    The result does not depend on `config.workers`.

    Args:
        clients (Sequence[ClientState]): The participating clients.
        config (FederationConfig): The federation settings.
        global_model (DenoiserModel): The initial global model; left untouched.

    Returns:
        The final global model and one report per round.
    """
    if not any(client.data_size for client in clients):
        raise ConfigurationError("Federated training needs at least one client with data")

    schedule = build_schedule(config.T, config.beta_start, config.beta_end)
    model = global_model.with_params(global_model.params.clone())
    reports = []

    logger.info(
        "Federated training: {clients} clients, {rounds} rounds, e={iterations}, mode={mode}",
        clients=len(clients), rounds=config.rounds, iterations=config.local_iterations,
        mode=config.aggregation_mode.value,
    )
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        for round_index in range(1, config.rounds + 1):
            started = time.perf_counter()
            futures = [pool.submit(local_train, client, model, config, schedule, round_index) for client in clients]

            uploads, losses = [], []
            for client, future in zip(clients, futures):
                try:
                    params, loss = future.result()
                except EmptyClientError as exc:
                    logger.warning("Round {round}: {error}, skipping", round=round_index, error=exc)
                    continue
                uploads.append((params, client.data_size))
                losses.append(loss)

            model = model.with_params(
                aggregate(model.params, uploads, config.server_lr, config.aggregation_mode),
            )
            report = RoundReport(
                round=round_index,
                client_losses=losses,
                seconds=time.perf_counter() - started,
                checksum=model.params.checksum(),
            )
            reports.append(report)
            logger.info(
                "Round {round}/{rounds}: loss={loss:.6f} in {seconds:.2f}s",
                round=round_index, rounds=config.rounds, loss=report.client_mean_loss, seconds=report.seconds,
            )

    return model, reports


def write_round_reports(path: pathlib.Path, reports: Sequence[RoundReport]):
    """Write one CSV row per round with columns `round,client_mean_loss,seconds,checksum`."""
    rows = [[report.round, report.client_mean_loss, report.seconds, report.checksum] for report in reports]
    pd.DataFrame(rows, columns=ROUND_COLUMNS).to_csv(path, index=False)
