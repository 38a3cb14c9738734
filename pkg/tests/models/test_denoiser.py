import numpy as np
import pytest

from fedcache.common.exceptions import ConfigurationError, UsageError
from fedcache.models import build_unet_graph, denoise, init_denoiser


def test_default_unet_size():
    graph = build_unet_graph()
    count = sum(int(np.prod(shape)) for shape in graph.parameter_shapes().values())

    assert graph.input_shape == (16,)
    assert graph.output_shape == (16,)
    assert 500_000 <= count <= 1_100_000


def test_unet_rejects_indivisible_latent_dimension():
    with pytest.raises(ConfigurationError):
        build_unet_graph(latent_dim=10, widths=(8, 16, 32))


@pytest.mark.parametrize("architecture", ("unet", "mlp"))
def test_denoise_preserves_shape(architecture: str):
    model = init_denoiser(latent_dim=8, steps=10, seed=0, widths=(4, 8), time_dim=8, architecture=architecture)
    x_t = np.random.default_rng(0).standard_normal((3, 8))

    assert denoise(model, x_t, 5).shape == (3, 8)
    assert denoise(model, x_t[0], 5).shape == (8,)


@pytest.mark.parametrize("t", (0, 11))
def test_denoise_rejects_out_of_range_steps(t: int):
    model = init_denoiser(latent_dim=8, steps=10, seed=0, widths=(4, 8), time_dim=8)

    with pytest.raises(UsageError):
        denoise(model, np.zeros(8), t)


def test_initialization_is_seeded():
    first = init_denoiser(latent_dim=8, steps=10, seed=4, widths=(4, 8), time_dim=8)
    second = init_denoiser(latent_dim=8, steps=10, seed=4, widths=(4, 8), time_dim=8)
    third = init_denoiser(latent_dim=8, steps=10, seed=5, widths=(4, 8), time_dim=8)

    assert first.params.equals(second.params)
    assert not first.params.equals(third.params)


def test_prediction_depends_on_time_step():
    model = init_denoiser(latent_dim=8, steps=10, seed=0, widths=(4, 8), time_dim=8)
    x_t = np.random.default_rng(1).standard_normal(8)

    assert not np.allclose(denoise(model, x_t, 1), denoise(model, x_t, 10))
