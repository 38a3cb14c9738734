import pathlib
from dataclasses import dataclass

import numpy as np
import pandas as pd
from loguru import logger

from fedcache.common.exceptions import DataError, DataFormatError

DEFAULT_FEATURES = 3952
CANONICAL_RECORDS = 1_000_209
MAX_MALFORMED_RATIO = 0.001
DELIMITER = "::"
COLUMNS = ["user_id", "movie_id", "rating", "timestamp"]


@dataclass(frozen=True)
class RatingsDataset:
    """Validated MovieLens ratings.

    Attributes:
        records (pd.DataFrame): One row per rating with integer columns `user_id`, `movie_id`, `rating` and
            `timestamp`, in file order.
        features (int): Content library size F; every `movie_id` lies in `1..F`.
        malformed (int): Number of skipped input lines.
    """
    records: pd.DataFrame
    features: int = DEFAULT_FEATURES
    malformed: int = 0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_users(self) -> int:
        return int(self.records["user_id"].nunique())

    @property
    def n_movies(self) -> int:
        return int(self.records["movie_id"].nunique())

    @property
    def user_ids(self) -> np.ndarray:
        return np.sort(self.records["user_id"].unique())


def _read_text(path: pathlib.Path) -> str:
    try:
        data = pathlib.Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"Cannot read ratings file {path}: {exc}") from exc

    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def _parse_line(line: str, features: int) -> tuple[int, int, int, int] | None:
    parts = line.split(DELIMITER)
    if len(parts) != 4:
        return None

    try:
        user_id, movie_id, rating, timestamp = (int(part) for part in parts)
    except ValueError:
        return None

    if user_id < 1 or not 1 <= movie_id <= features or not 1 <= rating <= 5:
        return None

    return user_id, movie_id, rating, timestamp


def parse_movielens(path: pathlib.Path, features: int = DEFAULT_FEATURES, strict: bool = False) -> RatingsDataset:
    """Read an ml-1m style `ratings.dat` file.

    Each line is `UserID::MovieID::Rating::Timestamp`. Lines that do not parse or violate the dataset invariants
    (movie id outside `1..features`, rating outside `1..5`) are skipped and counted.

    Args:
        path (pathlib.Path): Location of the ratings file.
        features (int): Content library size F.
        strict (bool): Whether a record count other than the canonical ml-1m count is an error.

    Returns:
        The parsed dataset.

    Raises:
        DataError: The file cannot be read.
        DataFormatError: The file is empty, more than 0.1% of its lines are malformed, or the record count is not
            canonical while `strict` is set.
    """
    lines = [line for line in _read_text(path).splitlines() if line.strip()]
    if not lines:
        raise DataFormatError(f"Ratings file {path} is empty")

    rows = []
    malformed = 0
    for line in lines:
        row = _parse_line(line.strip(), features)
        if row is None:
            malformed += 1
        else:
            rows.append(row)

    if malformed / len(lines) > MAX_MALFORMED_RATIO:
        raise DataFormatError(f"{malformed} of {len(lines)} lines in {path} are malformed")
    if malformed:
        logger.warning("Skipped {malformed} malformed lines in {path}", malformed=malformed, path=path)

    if len(rows) != CANONICAL_RECORDS:
        message = f"{path} holds {len(rows)} ratings, the canonical ml-1m file holds {CANONICAL_RECORDS}"
        if strict:
            raise DataFormatError(message)
        logger.warning(message)

    records = pd.DataFrame(np.array(rows, dtype=np.int64).reshape(-1, 4), columns=COLUMNS)
    dataset = RatingsDataset(records=records, features=features, malformed=malformed)
    logger.info(
        "Loaded {ratings} ratings from {users} users on {movies} movies",
        ratings=len(dataset), users=dataset.n_users, movies=dataset.n_movies,
    )

    return dataset
