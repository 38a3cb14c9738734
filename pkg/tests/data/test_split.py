import pathlib

import numpy as np
import pandas as pd
import pytest

from fedcache.common.exceptions import ConfigurationError
from fedcache.data import (
    RatingsDataset,
    SplitPlan,
    make_split,
    mark_training,
    parse_movielens,
    write_split_manifest,
    write_trace_csv,
)


@pytest.fixture()
def dataset(ratings_path: pathlib.Path) -> RatingsDataset:
    return parse_movielens(ratings_path, features=40)


def test_split_is_a_partition_of_users(dataset: RatingsDataset):
    split = make_split(dataset, SplitPlan(seed=1, clients=4))

    public = set(split.public.user_ids)
    clients = [set(partition.user_ids) for partition in split.clients]
    assert len(public) == 6
    assert set.union(public, *clients) == set(dataset.user_ids)
    assert sum(map(len, clients)) + len(public) == dataset.n_users
    assert sorted(len(partition) for partition in clients) == [6, 6, 6, 6]


def test_round_robin_sizes_differ_by_at_most_one(dataset: RatingsDataset):
    split = make_split(dataset, SplitPlan(seed=2, clients=5, public_fraction=0.1))
    sizes = [len(partition) for partition in split.clients]

    assert max(sizes) - min(sizes) <= 1


def test_train_and_test_are_exhaustive_and_disjoint(dataset: RatingsDataset):
    split = make_split(dataset, SplitPlan(seed=0, clients=3, public_fraction=0.0))
    nonzero = sum(int(np.count_nonzero(partition.matrix)) for partition in split.clients)

    assert len(split.public) == 0
    assert nonzero == split.train_ratings
    assert split.train_ratings + len(split.trace) == len(dataset)


def test_training_portion_is_the_earliest_ratings():
    records = pd.DataFrame({
        "user_id": [1, 1, 1, 1, 1, 2],
        "movie_id": [5, 4, 3, 2, 1, 9],
        "rating": [1, 2, 3, 4, 5, 3],
        "timestamp": [50, 40, 30, 10, 10, 7],
    })

    is_train = mark_training(records, 0.8)

    assert is_train.tolist() == [False, True, True, True, True, True]


def test_split_is_reproducible(dataset: RatingsDataset):
    first = make_split(dataset, SplitPlan(seed=9, clients=4))
    second = make_split(dataset, SplitPlan(seed=9, clients=4))
    other = make_split(dataset, SplitPlan(seed=10, clients=4))

    pd.testing.assert_frame_equal(first.assignments, second.assignments)
    np.testing.assert_array_equal(first.trace.movie_ids, second.trace.movie_ids)
    assert not first.assignments.equals(other.assignments)


def test_single_client_holds_all_non_public_users(dataset: RatingsDataset):
    split = make_split(dataset, SplitPlan(seed=0, clients=1))

    assert len(split.clients[0]) == dataset.n_users - len(split.public)


def test_too_many_clients(dataset: RatingsDataset):
    with pytest.raises(ConfigurationError):
        make_split(dataset, SplitPlan(seed=0, clients=25))


def test_trace_holds_only_client_users(dataset: RatingsDataset):
    split = make_split(dataset, SplitPlan(seed=3, clients=4))
    public = set(split.public.user_ids)
    records = dataset.records
    is_train = mark_training(records, 0.8)
    held_out = records[~is_train & ~records["user_id"].isin(public)]

    assert len(split.trace) == len(held_out)


def test_audit_files(dataset: RatingsDataset, tmp_path: pathlib.Path):
    split = make_split(dataset, SplitPlan(seed=0, clients=4))
    write_split_manifest(tmp_path / "split.csv", split)
    write_trace_csv(tmp_path / "trace.csv", split.trace)

    assignments = pd.read_csv(tmp_path / "split.csv")
    trace = pd.read_csv(tmp_path / "trace.csv")
    assert list(assignments.columns) == ["user_id", "assignment"]
    assert set(assignments["assignment"]) == {"public", "client-0", "client-1", "client-2", "client-3"}
    assert trace["movie_id"].tolist() == split.trace.movie_ids.tolist()
