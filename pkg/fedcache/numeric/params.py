import hashlib
from collections.abc import Iterable, Iterator
from dataclasses import dataclass

import numpy as np

from fedcache.common.exceptions import ConfigurationError, NumericError

Tensor = np.ndarray

DTYPES: dict[str, type[np.floating]] = {
    "float64": np.float64,
    "float32": np.float32,
}


def ensure_finite(value: Tensor, what: str) -> Tensor:
    """Raise `NumericError` if `value` holds NaN or infinite entries.

    Args:
        value (Tensor): The array to check.
        what (str): Human readable name of the value, used in the error message.

    Returns:
        The unchanged `value`, for chaining.
    """
    if not np.all(np.isfinite(value)):
        raise NumericError(f"Non-finite values in {what}")

    return value


@dataclass
class Parameter:
    """A named trainable tensor together with its accumulated gradient.

    Attributes:
        name (str): Fully qualified name, `<node>.<suffix>`.
        value (Tensor): The parameter values.
        grad (Tensor): The accumulated gradient, same shape as `value`.
    """
    name: str
    value: Tensor
    grad: Tensor


class ParameterSet:
    """Ordered collection of named parameter tensors and their gradients.

    Iteration order is insertion order, so two sets built by the same code hold their entries in the same order in
    every process. Sets are exchanged between clients and the base station by value: use `clone` before handing a
    set to a party that may mutate it.
    """

    def __init__(self, entries: Iterable[tuple[str, Tensor]] = ()):
        self._entries: dict[str, Parameter] = {}
        for name, value in entries:
            self.add(name, value)

    def add(self, name: str, value: Tensor) -> Parameter:
        """Append a new entry with a zero gradient.

        Args:
            name (str): Unique name of the entry.
            value (Tensor): Initial values; the array is copied.

        Returns:
            The created `Parameter`.
        """
        if name in self._entries:
            raise ConfigurationError(f"Duplicate parameter name `{name}`")

        value = np.array(value, copy=True)
        parameter = Parameter(name=name, value=value, grad=np.zeros_like(value))
        self._entries[name] = parameter

        return parameter

    def parameter(self, name: str) -> Parameter:
        try:
            return self._entries[name]
        except KeyError as exc:
            raise ConfigurationError(f"Unknown parameter `{name}`") from exc

    def __getitem__(self, name: str) -> Tensor:
        return self.parameter(name).value

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def structure(self) -> dict[str, tuple[int, ...]]:
        """Map every entry name to its shape, in iteration order."""
        return {name: parameter.value.shape for name, parameter in self._entries.items()}

    def num_elements(self) -> int:
        return sum(parameter.value.size for parameter in self)

    @property
    def dtype(self) -> np.dtype:
        for parameter in self:
            return parameter.value.dtype

        return np.dtype(np.float64)

    def clone(self) -> "ParameterSet":
        """Deep copy values and gradients."""
        copy = ParameterSet()
        for parameter in self:
            copy.add(parameter.name, parameter.value).grad[...] = parameter.grad

        return copy

    def zero_grad(self):
        for parameter in self:
            parameter.grad.fill(0)

    def subset(self, prefix: str) -> "ParameterSet":
        """Copy the entries whose name starts with `prefix`."""
        return ParameterSet(
            (parameter.name, parameter.value) for parameter in self if parameter.name.startswith(prefix)
        )

    def merge(self, other: "ParameterSet") -> "ParameterSet":
        """Return a new set holding the entries of `self` followed by those of `other`."""
        merged = self.clone()
        for parameter in other:
            merged.add(parameter.name, parameter.value)

        return merged

    def checksum(self) -> str:
        """SHA-256 hex digest of the set's binary serialization."""
        from .serialization import dumps

        return hashlib.sha256(dumps(self)).hexdigest()

    def equals(self, other: "ParameterSet") -> bool:
        """Bit-exact comparison of names, shapes and values."""
        if self.structure() != other.structure():
            return False

        return all(np.array_equal(mine.value, other[mine.name]) for mine in self)
