import numpy as np
import pytest

from fedcache.federated import ClientState, FederationConfig
from fedcache.models import DenoiserModel, init_denoiser


@pytest.fixture()
def global_model() -> DenoiserModel:
    return init_denoiser(latent_dim=4, steps=10, seed=0, widths=(4, 8), time_dim=8)


@pytest.fixture()
def config() -> FederationConfig:
    return FederationConfig(clients=3, rounds=2, local_iterations=3, batch_size=4, eta_d=0.01, T=10, seed=7)


@pytest.fixture()
def clients() -> list[ClientState]:
    rng = np.random.default_rng(11)
    return [
        ClientState(client_id=client_id, local_latents=rng.standard_normal((size, 4)), data_size=size)
        for client_id, size in enumerate((5, 9, 6))
    ]
