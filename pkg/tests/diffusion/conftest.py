from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pytest

from fedcache.numeric import ParameterSet, Tensor


@dataclass
class OracleDenoiser:
    """Predicts exactly the noise it is told about; used to pin the objective's minimum."""
    steps: int
    noise: Tensor
    params: ParameterSet = field(default_factory=ParameterSet)
    latent_dim: int = 2

    def forward(self, x_t: Tensor, t) -> tuple[Tensor, Any]:
        return self.noise.copy(), None

    def backward(self, tape: Any, grad: Tensor):
        pass

    def denoise(self, x_t: Tensor, t) -> Tensor:
        return self.noise.copy()


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)
