import pathlib
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import pandas as pd
from loguru import logger
from pydantic import BaseModel, PositiveFloat, model_validator

from fedcache.common.exceptions import ConfigurationError
from fedcache.common.utils.seeding import derive_seed
from fedcache.data import RequestTrace

from .policies import CachePolicy, hit_percentage
from .popularity import CacheState

RESULT_COLUMNS = ["policy", "capacity", "hit_percentage", "mean_delay_ms", "seed"]


class DelayModel(BaseModel):
    """Two-level request delay: `d_hit` when served by the base station, `d_miss` when fetched from the cloud.

    Attributes:
        d_hit (PositiveFloat): Delay of a cache hit, in milliseconds.
        d_miss (PositiveFloat): Delay of a cache miss, in milliseconds.
    """
    d_hit: PositiveFloat = 10.0
    d_miss: PositiveFloat = 50.0

    @model_validator(mode="after")
    def check_order(self) -> "DelayModel":
        if self.d_hit >= self.d_miss:
            raise ValueError(f"d_hit ({self.d_hit}) must be smaller than d_miss ({self.d_miss})")
        return self

    def mean_delay(self, hit_percentage: float) -> float:
        return self.d_miss - hit_percentage / 100.0 * (self.d_miss - self.d_hit)


class Evaluation(BaseModel):
    """One cell of a policy × capacity evaluation."""
    policy: str
    capacity: int
    hit_percentage: float
    mean_delay_ms: float
    seed: int


def evaluate(cache: CacheState, trace: RequestTrace, delay: DelayModel) -> tuple[float, float]:
    """Replay the trace against a fixed cache.

    Returns:
        The hit percentage and the mean request delay in milliseconds.
    """
    hits = hit_percentage(cache, trace)
    return hits, delay.mean_delay(hits)


def sweep(
        policies: Sequence[CachePolicy],
        capacities: Sequence[int],
        trace: RequestTrace,
        delay: DelayModel,
        seed: int = 0,
        workers: int = 1,
) -> list[Evaluation]:
    """Evaluate every policy at every capacity.

    Each cell gets its own seed derived from `(seed, policy name, capacity)`, so the table does not depend on
    `workers` or on evaluation order. Rows are ordered by policy, then by capacity.
    """
    if not capacities:
        raise ConfigurationError("Sweep needs at least one capacity")
    if any(later <= earlier for earlier, later in zip(capacities, capacities[1:])):
        raise ConfigurationError(f"Capacities must be strictly ascending, got {list(capacities)}")

    cells = [(policy, capacity, derive_seed(seed, policy.name, capacity))
             for policy in policies for capacity in capacities]

    def run(cell: tuple[CachePolicy, int, int]) -> Evaluation:
        policy, capacity, cell_seed = cell
        hits = policy.hit_percentage(trace, capacity, cell_seed)
        logger.debug("{policy} at capacity {capacity}: {hits:.2f}%", policy=policy.name, capacity=capacity, hits=hits)

        return Evaluation(
            policy=policy.name,
            capacity=capacity,
            hit_percentage=hits,
            mean_delay_ms=delay.mean_delay(hits),
            seed=cell_seed,
        )

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, cells))


def write_evaluations(path: pathlib.Path, evaluations: Sequence[Evaluation]):
    """Write `policy,capacity,hit_percentage,mean_delay_ms,seed` rows."""
    pd.DataFrame([evaluation.model_dump() for evaluation in evaluations], columns=RESULT_COLUMNS) \
        .to_csv(path, index=False)
