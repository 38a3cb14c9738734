import pathlib

import pytest

from fedcache.common.exceptions import DataError, DataFormatError
from fedcache.data import parse_movielens


def test_parse_first_canonical_record(tmp_path: pathlib.Path):
    path = tmp_path / "ratings.dat"
    path.write_text("1::1193::5::978300760\n")

    dataset = parse_movielens(path)

    assert dataset.records.iloc[0].tolist() == [1, 1193, 5, 978300760]
    assert (len(dataset), dataset.n_users, dataset.n_movies, dataset.malformed) == (1, 1, 1, 0)


def test_parse_synthetic_file(ratings_path: pathlib.Path):
    dataset = parse_movielens(ratings_path, features=40)

    assert dataset.n_users == 30
    assert dataset.records["movie_id"].between(1, 40).all()
    assert dataset.records["rating"].between(1, 5).all()


def test_empty_file(tmp_path: pathlib.Path):
    path = tmp_path / "ratings.dat"
    path.write_text("")

    with pytest.raises(DataFormatError):
        parse_movielens(path)


def test_missing_file(tmp_path: pathlib.Path):
    with pytest.raises(DataError):
        parse_movielens(tmp_path / "missing.dat")


def test_few_malformed_lines_are_counted(tmp_path: pathlib.Path):
    good = [f"{user}::{movie}::3::{1000 + movie}" for user in range(1, 41) for movie in range(1, 51)]
    path = tmp_path / "ratings.dat"
    path.write_text("\n".join(good + ["garbage"]) + "\n")

    dataset = parse_movielens(path)

    assert dataset.malformed == 1
    assert len(dataset) == 2000


@pytest.mark.parametrize("line", (
    "1::1193::5",
    "1::abc::5::978300760",
    "1::5000::5::978300760",
    "1::1193::6::978300760",
    "1::1193::0::978300760",
))
def test_too_many_malformed_lines(tmp_path: pathlib.Path, line: str):
    path = tmp_path / "ratings.dat"
    path.write_text(f"1::1::4::978300760\n{line}\n")

    with pytest.raises(DataFormatError):
        parse_movielens(path)


def test_non_utf8_file_falls_back_to_latin1(tmp_path: pathlib.Path):
    good = "".join(f"{user}::{movie}::4::{movie}\n" for user in range(1, 41) for movie in range(1, 51))
    path = tmp_path / "ratings.dat"
    path.write_bytes(good.encode() + b"caf\xe9\n")

    dataset = parse_movielens(path)

    assert len(dataset) == 2000
    assert dataset.malformed == 1


def test_strict_mode_requires_canonical_count(ratings_path: pathlib.Path):
    with pytest.raises(DataFormatError):
        parse_movielens(ratings_path, features=40, strict=True)
