import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from fedcache.common.exceptions import ConfigurationError, EmptyClientError
from fedcache.common.utils.seeding import derive_rng
from fedcache.diffusion import DiffusionTrainer, NoiseSchedule
from fedcache.models import AutoencoderModel, DenoiserModel
from fedcache.numeric import ParameterSet, Tensor

from .settings import FederationConfig

Encoder = Callable[[Tensor], Tensor]


@dataclass(frozen=True)
class ClientState:
    """What a client keeps between rounds: its encoded data, never the raw rating vectors.

    Attributes:
        client_id (int): Position of the client in the federation.
        local_latents (Tensor): `(n_i, latent_dim)` latents, encoded once with the frozen encoder.
        data_size (int): Number of raw vectors |d_i| behind the latents.
    """
    client_id: int
    local_latents: Tensor
    data_size: int

    def __post_init__(self):
        if len(self.local_latents) != self.data_size:
            raise ConfigurationError(
                f"Client {self.client_id}: {len(self.local_latents)} latents for data size {self.data_size}",
            )


def encode_clients(partitions: Sequence[Tensor], encoder: Encoder) -> list[ClientState]:
    """Encode every client's rating vectors once, before the first round.

    Args:
        partitions (Sequence[Tensor]): One `(n_i, F)` matrix of rating vectors per client.
        encoder (Encoder): Maps a batch of rating vectors to the latents the diffusion model trains on.

    Returns:
        The client states, in partition order.
    """
    return [
        ClientState(client_id=client_id, local_latents=np.asarray(encoder(vectors)), data_size=len(vectors))
        for client_id, vectors in enumerate(partitions)
    ]


def autoencoder_encoder(autoencoder: AutoencoderModel) -> Encoder:
    """Encoder followed by the latent standardization shipped with the autoencoder."""
    return lambda vectors: autoencoder.scaler.transform(autoencoder.encode(vectors))


def client_rng(seed: int, round_index: int, client_id: int) -> np.random.Generator:
    """Random stream of one client in one round; independent of scheduling order."""
    return derive_rng(seed, round_index, client_id)


def local_train(
        client: ClientState,
        global_model: DenoiserModel,
        config: FederationConfig,
        schedule: NoiseSchedule,
        round_index: int = 1,
) -> tuple[ParameterSet, float]:
    """Train a private copy of the broadcast model on the client's latents.

    Args:
        client (ClientState): The client.
        global_model (DenoiserModel): The broadcast model; left untouched.
        config (FederationConfig): Local iterations, batch size and learning rate.
        schedule (NoiseSchedule): The noise schedule.
        round_index (int): The current round, part of the client's random stream.

    Returns:
        The local parameters and the mean local loss (NaN when no iteration ran).
    """
    if client.data_size == 0:
        raise EmptyClientError(client.client_id)

    params = global_model.params.clone()
    params.zero_grad()
    trainer = DiffusionTrainer(
        schedule=schedule,
        denoiser=global_model.with_params(params),
        rng=client_rng(config.seed, round_index, client.client_id),
    )
    losses = trainer.fit(client.local_latents, config.local_iterations, config.batch_size, config.eta_d)

    return params, float(np.mean(losses)) if losses else math.nan
