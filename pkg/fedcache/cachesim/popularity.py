import pathlib
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import pandas as pd

from fedcache.common.exceptions import ConfigurationError, NumericError, UsageError
from fedcache.numeric import Tensor

Decoder = Callable[[Tensor], Tensor]


@dataclass(frozen=True)
class PopularityScores:
    """Predicted popularity per content; entry `f - 1` scores movie `f`."""
    scores: Tensor

    def __post_init__(self):
        if not np.all(np.isfinite(self.scores)):
            raise NumericError("Popularity scores hold non-finite values")
        if self.scores.min() < 0 or self.scores.max() > 1:
            raise NumericError("Popularity scores must lie in [0, 1]")

    @property
    def features(self) -> int:
        return len(self.scores)


@dataclass(frozen=True)
class CacheState:
    """Contents held by a cache of `capacity` slots."""
    capacity: int
    cached: frozenset[int]

    def __post_init__(self):
        if len(self.cached) > self.capacity:
            raise ConfigurationError(f"{len(self.cached)} contents do not fit a cache of {self.capacity}")
        if any(movie_id < 1 for movie_id in self.cached):
            raise ConfigurationError("Movie ids start at 1")

    def __contains__(self, movie_id: object) -> bool:
        return movie_id in self.cached

    def hits(self, movie_ids: np.ndarray) -> np.ndarray:
        """Boolean mask of the requests served from the cache."""
        return np.isin(movie_ids, np.fromiter(self.cached, dtype=np.int64, count=len(self.cached)))


def top_n_ids(values: Tensor, n: int) -> np.ndarray:
    """1-based ids of the `n` largest values, ties broken by the smaller id."""
    if not 1 <= n <= len(values):
        raise ConfigurationError(f"Cache capacity must lie in 1..{len(values)}, got {n}")

    ids = np.arange(1, len(values) + 1)
    order = np.lexsort((ids, -np.asarray(values)))

    return ids[order[:n]]


def predict_popularity(decoder: Decoder, latent_samples: Tensor) -> PopularityScores:
    """Average the decoded samples per content.

    Args:
        decoder (Decoder): Maps a `(U, latent_dim)` batch of generated samples to `(U, F)` vectors in [0, 1].
        latent_samples (Tensor): The generated samples.

    Returns:
        The popularity scores.
    """
    if len(latent_samples) == 0:
        raise UsageError("Popularity prediction needs at least one generated sample")

    return PopularityScores(scores=np.asarray(decoder(latent_samples)).mean(axis=0))


def select_top_n(scores: PopularityScores, n: int) -> CacheState:
    """Cache the `n` contents with the highest score."""
    return CacheState(capacity=n, cached=frozenset(int(movie_id) for movie_id in top_n_ids(scores.scores, n)))


def write_popularity_csv(path: pathlib.Path, scores: PopularityScores):
    pd.DataFrame({
        "movie_id": np.arange(1, scores.features + 1),
        "score": scores.scores,
    }).to_csv(path, index=False)
