from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
import pandas as pd

from fedcache.numeric import Tensor

from .movielens import RatingsDataset

MAX_RATING = 5.0


@dataclass(frozen=True)
class UserVector:
    user_id: int
    vector: Tensor


@dataclass(frozen=True)
class UserVectors:
    """Rating vectors of a group of users, stacked into one matrix.

    Attributes:
        user_ids (np.ndarray): Ascending user ids, one per row.
        matrix (Tensor): `(users, F)` matrix; entry `f - 1` holds `rating / 5` for movie `f`, zero when unrated.
    """
    user_ids: np.ndarray
    matrix: Tensor

    def __len__(self) -> int:
        return len(self.user_ids)

    def __iter__(self) -> Iterator[UserVector]:
        for user_id, vector in zip(self.user_ids, self.matrix):
            yield UserVector(user_id=int(user_id), vector=vector)

    @property
    def features(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def empty(cls, features: int) -> "UserVectors":
        return cls(user_ids=np.empty(0, dtype=np.int64), matrix=np.zeros((0, features)))


def build_user_vectors(dataset: RatingsDataset, subset: pd.DataFrame | None = None) -> UserVectors:
    """Vectorize ratings per user.

    Args:
        dataset (RatingsDataset): The dataset; provides F.
        subset (pd.DataFrame | None): Rating records to vectorize, typically the training portion of a split.
            Defaults to all records of `dataset`.

    Returns:
        One vector per user with at least one rating in `subset`.
    """
    records = dataset.records if subset is None else subset
    if records.empty:
        return UserVectors.empty(dataset.features)

    user_ids, rows = np.unique(records["user_id"].to_numpy(), return_inverse=True)
    matrix = np.zeros((len(user_ids), dataset.features))
    matrix[rows, records["movie_id"].to_numpy() - 1] = records["rating"].to_numpy() / MAX_RATING

    return UserVectors(user_ids=user_ids, matrix=matrix)
