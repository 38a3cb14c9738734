from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from fedcache.common.exceptions import ConfigurationError
from fedcache.common.utils.seeding import derive_rng
from fedcache.data import RequestTrace

from .popularity import CacheState, PopularityScores, select_top_n, top_n_ids


class CachePolicy(Protocol):
    """A caching strategy evaluated by `sweep`."""
    name: str

    def hit_percentage(self, trace: RequestTrace, capacity: int, seed: int) -> float: ...


def hit_percentage(cache: CacheState, trace: RequestTrace) -> float:
    """Share of the trace's requests served from `cache`, in percent."""
    return 100.0 * int(cache.hits(trace.movie_ids).sum()) / len(trace)


def oracle_policy(trace: RequestTrace, n: int) -> CacheState:
    """Cache the `n` most requested contents of the trace itself."""
    return CacheState(capacity=n, cached=frozenset(int(movie_id) for movie_id in top_n_ids(trace.counts(), n)))


def random_policy(features: int, n: int, seed: int) -> CacheState:
    """Cache `n` contents drawn uniformly without replacement."""
    if not 1 <= n <= features:
        raise ConfigurationError(f"Cache capacity must lie in 1..{features}, got {n}")

    chosen = derive_rng(seed, "random").choice(features, size=n, replace=False) + 1
    return CacheState(capacity=n, cached=frozenset(int(movie_id) for movie_id in chosen))


@dataclass
class ThompsonState:
    """Beta posterior counts per content; entry `f - 1` belongs to movie `f`."""
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def initial(cls, features: int) -> "ThompsonState":
        return cls(a=np.ones(features), b=np.ones(features))

    @property
    def features(self) -> int:
        return len(self.a)


def thompson_policy(state: ThompsonState, trace: RequestTrace, n: int, epochs: int, seed: int) -> float:
    """Replay the trace against a Thompson sampling cache and report the overall hit percentage.

    The trace is cut into `epochs` consecutive slices of (nearly) equal length. Before each slice a popularity
    θ_f ~ Beta(a_f, b_f) is drawn for every content and the `n` largest are cached. While replaying the slice, a
    hit on content f increments a_f, a miss on content f increments b_f. `state` is updated in place.
    """
    if epochs < 1:
        raise ConfigurationError(f"Thompson sampling needs at least one epoch, got {epochs}")

    rng = derive_rng(seed, "thompson")
    hits = 0
    for requests in np.array_split(trace.movie_ids, epochs):
        theta = rng.beta(state.a, state.b)
        cached = top_n_ids(theta, n)
        served = np.isin(requests, cached)
        hits += int(served.sum())
        np.add.at(state.a, requests[served] - 1, 1)
        np.add.at(state.b, requests[~served] - 1, 1)

    return 100.0 * hits / len(trace)


@dataclass
class StaticPolicy:
    """A policy that fills the cache once, before the trace is replayed."""
    name: str
    select: Callable[[int], CacheState]

    def hit_percentage(self, trace: RequestTrace, capacity: int, seed: int) -> float:
        return hit_percentage(self.select(capacity), trace)


@dataclass
class ThompsonPolicy:
    features: int
    epochs: int = 10
    name: str = field(default="thompson")

    def hit_percentage(self, trace: RequestTrace, capacity: int, seed: int) -> float:
        return thompson_policy(ThompsonState.initial(self.features), trace, capacity, self.epochs, seed)


@dataclass
class RandomPolicy:
    features: int
    name: str = field(default="random")

    def hit_percentage(self, trace: RequestTrace, capacity: int, seed: int) -> float:
        return hit_percentage(random_policy(self.features, capacity, seed), trace)


def oracle(trace: RequestTrace) -> StaticPolicy:
    return StaticPolicy(name="oracle", select=lambda n: oracle_policy(trace, n))


def popularity_policy(name: str, scores: PopularityScores) -> StaticPolicy:
    """Cache the top contents of predicted popularity scores."""
    return StaticPolicy(name=name, select=lambda n: select_top_n(scores, n))
