import pathlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd
from loguru import logger

from fedcache.common.exceptions import UsageError
from fedcache.common.utils.seeding import derive_rng
from fedcache.numeric import Tensor, ensure_finite

from .schedule import NoiseSchedule
from .trainer import NoisePredictor

DEFAULT_CHUNK_SIZE = 250


def _sample_chunk(schedule: NoiseSchedule, denoiser: NoisePredictor, size: int, rng: np.random.Generator) -> Tensor:
    x = rng.standard_normal((size, denoiser.latent_dim))
    for t in range(schedule.T, 0, -1):
        i = t - 1
        epsilon = denoiser.denoise(x, t)
        mean = (x - schedule.beta[i] / np.sqrt(1.0 - schedule.alpha_bar[i]) * epsilon) / np.sqrt(schedule.alpha[i])
        x = mean + np.sqrt(schedule.posterior_var[i]) * rng.standard_normal(x.shape) if t > 1 else mean

    return ensure_finite(x, "generated samples")


def sample(
        schedule: NoiseSchedule,
        denoiser: NoisePredictor,
        count: int,
        seed: int,
        workers: int = 1,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> Tensor:
    """Ancestral sampling of `count` latents, starting from `x_T ~ N(0, I)`.

    The samples are produced in fixed chunks of `chunk_size`; chunk `k` uses a generator derived from
    `(seed, k)`. The result is ordered by chunk, then by position within the chunk, and does not depend on
    `workers`.

    Returns:
        A `(count, latent_dim)` matrix of generated latents.
    """
    if count < 1:
        raise UsageError(f"Sample count must be positive, got {count}")

    chunks = [(index, min(chunk_size, count - start)) for index, start in enumerate(range(0, count, chunk_size))]

    def run(chunk: tuple[int, int]) -> Tensor:
        index, size = chunk
        return _sample_chunk(schedule, denoiser, size, derive_rng(seed, index))

    logger.info("Sampling {count} latents over T={steps} steps", count=count, steps=schedule.T)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(chunk) for chunk in chunks]

    return np.concatenate(results)


def write_latents_csv(path: pathlib.Path, latents: Tensor):
    """Dump latents, one per row, with columns `z0..z{dim-1}`."""
    columns = [f"z{index}" for index in range(latents.shape[1])]
    pd.DataFrame(latents, columns=columns).to_csv(path, index=False)
