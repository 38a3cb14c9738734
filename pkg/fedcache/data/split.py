import pathlib
from dataclasses import dataclass

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, Field, NonNegativeInt, PositiveInt

from fedcache.common.exceptions import ConfigurationError, DataError
from fedcache.common.utils.seeding import derive_rng

from .movielens import RatingsDataset
from .vectors import UserVectors, build_user_vectors

PUBLIC = "public"


class SplitPlan(BaseModel):
    """How users and their ratings are divided.

    Attributes:
        seed (NonNegativeInt): Seed of the user permutation.
        public_fraction (float): Share of users reserved for autoencoder pre-training at the base station.
        clients (PositiveInt): Number of client partitions I.
        train_fraction (float): Share of every user's ratings, earliest first, used for training.
    """
    seed: NonNegativeInt = 0
    public_fraction: float = Field(default=0.20, ge=0.0, lt=1.0)
    clients: PositiveInt = 20
    train_fraction: float = Field(default=0.80, gt=0.0, le=1.0)


@dataclass(frozen=True)
class RequestTrace:
    """Held-out content requests in replay order, one movie id per request."""
    movie_ids: np.ndarray
    features: int

    def __post_init__(self):
        if len(self.movie_ids) == 0:
            raise DataError("Request trace is empty")
        if self.movie_ids.min() < 1 or self.movie_ids.max() > self.features:
            raise DataError(f"Request trace holds movie ids outside 1..{self.features}")

    def __len__(self) -> int:
        return len(self.movie_ids)

    def counts(self) -> np.ndarray:
        """Request count per content; entry `f - 1` belongs to movie `f`."""
        return np.bincount(self.movie_ids, minlength=self.features + 1)[1:]


@dataclass(frozen=True)
class DatasetSplit:
    """Result of `make_split`.

    Attributes:
        public (UserVectors): Training vectors of the public users.
        clients (list[UserVectors]): Training vectors of every client partition.
        trace (RequestTrace): Held-out ratings of the client users, ordered by `(timestamp, user_id, movie_id)`.
        assignments (pd.DataFrame): `user_id,assignment` rows, assignment being `public` or `client-<k>`.
        train_ratings (int): Number of ratings in the training portion.
    """
    public: UserVectors
    clients: list[UserVectors]
    trace: RequestTrace
    assignments: pd.DataFrame
    train_ratings: int


def mark_training(records: pd.DataFrame, train_fraction: float) -> pd.Series:
    """Flag the earliest `max(1, floor(n * train_fraction))` ratings of every user, ties ordered by movie id."""
    ordered = records.sort_values(["user_id", "timestamp", "movie_id"], kind="stable")
    rank = ordered.groupby("user_id").cumcount()
    size = ordered.groupby("user_id")["movie_id"].transform("size")
    n_train = np.maximum(1, np.floor(size.to_numpy() * train_fraction).astype(np.int64))

    return pd.Series(rank.to_numpy() < n_train, index=ordered.index).reindex(records.index)


def make_split(dataset: RatingsDataset, plan: SplitPlan) -> DatasetSplit:
    """Divide the dataset into public data, client partitions and a held-out request trace.

    Users are permuted with `plan.seed`; the first `round(public_fraction * users)` become public, the rest are
    dealt round-robin into `plan.clients` partitions.
    """
    users = dataset.user_ids
    permuted = derive_rng(plan.seed, "split").permutation(users)
    n_public = int(np.floor(plan.public_fraction * len(users) + 0.5))
    public_users = permuted[:n_public]
    client_users = permuted[n_public:]
    if plan.clients > len(client_users):
        raise ConfigurationError(f"Cannot form {plan.clients} clients from {len(client_users)} non-public users")

    records = dataset.records
    is_train = mark_training(records, plan.train_fraction)
    train = records[is_train]
    test = records[~is_train]

    partitions = [client_users[k::plan.clients] for k in range(plan.clients)]
    clients = [build_user_vectors(dataset, train[train["user_id"].isin(part)]) for part in partitions]
    public = build_user_vectors(dataset, train[train["user_id"].isin(public_users)])

    held_out = test[test["user_id"].isin(client_users)].sort_values(["timestamp", "user_id", "movie_id"],
                                                                      kind="stable")
    trace = RequestTrace(movie_ids=held_out["movie_id"].to_numpy(), features=dataset.features)

    labels = {int(user): PUBLIC for user in public_users}
    for k, part in enumerate(partitions):
        labels.update({int(user): f"client-{k}" for user in part})
    assignments = pd.DataFrame(sorted(labels.items()), columns=["user_id", "assignment"])

    logger.info(
        "Split {users} users: {public} public, {clients} clients of {low}..{high} users, {requests} test requests",
        users=len(users), public=len(public_users), clients=plan.clients,
        low=min(map(len, partitions)), high=max(map(len, partitions)), requests=len(trace),
    )

    return DatasetSplit(
        public=public,
        clients=clients,
        trace=trace,
        assignments=assignments,
        train_ratings=len(train),
    )


def write_split_manifest(path: pathlib.Path, split: DatasetSplit):
    split.assignments.to_csv(path, index=False)


def write_trace_csv(path: pathlib.Path, trace: RequestTrace):
    pd.DataFrame({"movie_id": trace.movie_ids}).to_csv(path, index=False)
