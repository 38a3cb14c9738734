from collections.abc import Sequence

import numpy as np

from fedcache.common.exceptions import ProtocolError
from fedcache.numeric import ParameterSet, Tensor

from .settings import AggregationMode


def _ordered_sum(terms: list[Tensor]) -> Tensor:
    # sorting along the client axis makes the floating point sum independent of upload order
    return np.sort(np.stack(terms), axis=0).sum(axis=0)


def aggregate(
        global_params: ParameterSet,
        locals: Sequence[tuple[ParameterSet, int]],
        server_lr: float = 1.0,
        mode: AggregationMode = AggregationMode.FEDAVG,
) -> ParameterSet:
    """Fold uploaded local models into a new global model.

    With `fedavg`, `ω' = ω - η Σ (|d_i| / d) (ω - ω_i)`; at `η = 1` this is evaluated directly as the weighted
    average `Σ (|d_i| / d) ω_i`. With `literal-eq9`, `ω' = ω - η Σ (|d_i| / d) ω_i`.

    Args:
        global_params (ParameterSet): The model broadcast this round.
        locals (Sequence[tuple[ParameterSet, int]]): Uploaded parameters with the uploader's data size.
        server_lr (float): Server step size η.
        mode (AggregationMode): The aggregation rule.

    Returns:
        The new global parameters.
    """
    if not locals:
        raise ProtocolError("No local models to aggregate")

    structure = global_params.structure()
    for index, (params, _) in enumerate(locals):
        if params.structure() != structure:
            raise ProtocolError(f"Local model {index} does not match the global model structure")

    total = sum(size for _, size in locals)
    if total <= 0:
        raise ProtocolError("Total data size of the uploading clients is zero")
    weights = [size / total for _, size in locals]

    result = ParameterSet()
    for parameter in global_params:
        current = parameter.value
        uploads = [params[parameter.name] for params, _ in locals]

        if mode is AggregationMode.LITERAL:
            value = current - server_lr * _ordered_sum([weight * upload for weight, upload in zip(weights, uploads)])
        elif server_lr == 1.0:
            value = _ordered_sum([weight * upload for weight, upload in zip(weights, uploads)])
        else:
            deltas = [weight * (current - upload) for weight, upload in zip(weights, uploads)]
            value = current - server_lr * _ordered_sum(deltas)

        result.add(parameter.name, value.astype(current.dtype, copy=False))

    return result
