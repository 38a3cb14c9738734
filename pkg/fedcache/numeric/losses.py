from typing import Literal

import numpy as np

from fedcache.common.exceptions import ConfigurationError

from .params import Tensor


def mse_loss(
        prediction: Tensor,
        target: Tensor,
        reduction: Literal["mean", "sample"] = "mean",
) -> tuple[float, Tensor]:
    """Squared error loss and its gradient w.r.t. `prediction`.

    Args:
        prediction (Tensor): Model output.
        target (Tensor): Expected values, same shape as `prediction`.
        reduction (str): `mean` averages over every element. `sample` sums over the per-sample axes and averages
                         over the leading batch axis.

    Returns:
        The scalar loss and the gradient array.
    """
    if prediction.shape != target.shape:
        raise ConfigurationError(f"Loss operands differ in shape: {prediction.shape} vs {target.shape}")

    diff = prediction - target
    scale = diff.size if reduction == "mean" else diff.shape[0]

    return float(np.sum(diff * diff) / scale), 2.0 * diff / scale
