import numpy as np
import pytest

from fedcache.data import RequestTrace


def make_trace(*movie_ids: int, features: int = 10) -> RequestTrace:
    return RequestTrace(movie_ids=np.array(movie_ids, dtype=np.int64), features=features)


@pytest.fixture()
def skewed_trace() -> RequestTrace:
    rng = np.random.default_rng(0)
    popularity = 1.0 / np.arange(1, 51)
    return RequestTrace(movie_ids=rng.choice(50, size=2000, p=popularity / popularity.sum()) + 1, features=50)
