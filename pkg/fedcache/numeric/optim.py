import numpy as np

from fedcache.common.exceptions import ConfigurationError, NumericError

from .params import ParameterSet


def _check_gradients(params: ParameterSet):
    for parameter in params:
        if not np.all(np.isfinite(parameter.grad)):
            raise NumericError(f"Non-finite gradient for `{parameter.name}`")


def sgd_step(params: ParameterSet, learning_rate: float) -> ParameterSet:
    """Apply `value <- value - learning_rate * grad` to every entry, then zero the gradients.

    Args:
        params (ParameterSet): The parameters, updated in place.
        learning_rate (float): Step size; zero leaves the values bit-identical.

    Returns:
        The same `ParameterSet`.
    """
    if learning_rate < 0:
        raise ConfigurationError(f"Learning rate must be non-negative, got {learning_rate}")
    _check_gradients(params)

    for parameter in params:
        parameter.value -= learning_rate * parameter.grad
    params.zero_grad()

    return params


class Adam:
    """Adaptive moment estimation over a `ParameterSet`.

    Not used by the federated protocol, whose local update is plain SGD; available for auxiliary training such as
    low-dimensional toy problems.
    """

    def __init__(
            self,
            params: ParameterSet,
            learning_rate: float = 1e-3,
            betas: tuple[float, float] = (0.9, 0.999),
            eps: float = 1e-8,
    ):
        if learning_rate < 0:
            raise ConfigurationError(f"Learning rate must be non-negative, got {learning_rate}")

        self._params = params
        self._learning_rate = learning_rate
        self._betas = betas
        self._eps = eps
        self._steps = 0
        self._first = {parameter.name: np.zeros_like(parameter.value) for parameter in params}
        self._second = {parameter.name: np.zeros_like(parameter.value) for parameter in params}

    def step(self) -> ParameterSet:
        _check_gradients(self._params)
        beta1, beta2 = self._betas
        self._steps += 1
        correction1 = 1.0 - beta1 ** self._steps
        correction2 = 1.0 - beta2 ** self._steps

        for parameter in self._params:
            first = self._first[parameter.name]
            second = self._second[parameter.name]
            first *= beta1
            first += (1.0 - beta1) * parameter.grad
            second *= beta2
            second += (1.0 - beta2) * parameter.grad ** 2
            parameter.value -= self._learning_rate * (first / correction1) / (np.sqrt(second / correction2) + self._eps)
        self._params.zero_grad()

        return self._params
