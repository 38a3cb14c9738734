class FedCacheError(Exception):
    """Base class for all errors raised by the simulator.

    Every subclass carries the process exit code the command line interface reports when the error escapes a
    command.

    Attributes:
        exit_code (int): The exit code associated with the error.
    """
    exit_code: int = 1


class ConfigurationError(FedCacheError):
    """Raised when a configuration value, a layer wiring or a shape contract is invalid."""
    exit_code = 2


class UsageError(FedCacheError):
    """Raised when an API is called out of contract (time step out of range, tape reuse, empty batch)."""
    exit_code = 2


class DataError(FedCacheError):
    """Raised when input data cannot be read."""
    exit_code = 3


class DataFormatError(DataError):
    """Raised when input data is readable but does not follow the expected format."""


class NumericError(FedCacheError):
    """Raised when a computation produces or consumes non-finite values."""
    exit_code = 4


class ProtocolError(FedCacheError):
    """Raised when the federated protocol receives structurally inconsistent models."""


class EmptyClientError(FedCacheError):
    """Signals that a client has no local data and must be excluded from a round."""

    def __init__(self, client_id: int):
        super().__init__(f"Client {client_id} holds no local data")
        self.client_id = client_id


class StageError(FedCacheError):
    """Wraps a failure of one pipeline stage.

    The exit code is inherited from the wrapped error so that the command line interface reports the root cause.
    """

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"Stage `{stage}` failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", FedCacheError.exit_code)
