import pytest

from fedcache.common.exceptions import (
    ConfigurationError,
    DataError,
    DataFormatError,
    FedCacheError,
    NumericError,
    StageError,
    UsageError,
)


@pytest.mark.parametrize(("error", "exit_code"), (
    (ConfigurationError("bad"), 2),
    (UsageError("bad"), 2),
    (DataError("bad"), 3),
    (DataFormatError("bad"), 3),
    (NumericError("bad"), 4),
))
def test_exit_codes(error: FedCacheError, exit_code: int):
    assert error.exit_code == exit_code


def test_stage_error_reports_the_cause():
    error = StageError("ingest", DataFormatError("empty file"))

    assert error.exit_code == 3
    assert "ingest" in str(error)


def test_stage_error_of_unexpected_exception():
    assert StageError("train", ValueError("boom")).exit_code == 1
