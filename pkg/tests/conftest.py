import pathlib

import numpy as np
import pytest

SYNTHETIC_FEATURES = 40


def write_ratings(
        path: pathlib.Path,
        users: int = 30,
        features: int = SYNTHETIC_FEATURES,
        ratings_per_user: tuple[int, int] = (6, 14),
        seed: int = 0,
) -> pathlib.Path:
    """Write a small ml-1m style ratings file with skewed content popularity."""
    rng = np.random.default_rng(seed)
    popularity = 1.0 / np.arange(1, features + 1)
    popularity /= popularity.sum()

    lines = []
    for user_id in range(1, users + 1):
        count = int(rng.integers(*ratings_per_user))
        movies = rng.choice(features, size=count, replace=False, p=popularity) + 1
        start = 978_300_000 + int(rng.integers(0, 1_000_000))
        for offset, movie_id in enumerate(movies):
            rating = int(rng.integers(1, 6))
            lines.append(f"{user_id}::{movie_id}::{rating}::{start + 60 * offset}")

    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture()
def ratings_path(tmp_path: pathlib.Path) -> pathlib.Path:
    return write_ratings(tmp_path / "ratings.dat")


SMALL_CONFIG = """\
# tiny experiment for end-to-end tests
F = 40
I = 3
R_max = 1
e = 2
batch_size = 4
T = 5
U = 20
N = 5
capacities = 5, 10
ae_epochs = 3
ae_hidden = 8
ae_batch_size = 8
latent_dim = 4
denoiser_widths = 4, 8
time_embedding_dim = 8
raw_widths = 4, 8
raw_rounds = 1
thompson_epochs = 2
sample_chunk_size = 8
"""


@pytest.fixture()
def config_path(tmp_path: pathlib.Path, ratings_path: pathlib.Path) -> pathlib.Path:
    path = tmp_path / "experiment.conf"
    path.write_text(SMALL_CONFIG + f"data_path = {ratings_path}\n")
    return path
