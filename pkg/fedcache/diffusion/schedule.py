from dataclasses import dataclass

import numpy as np

from fedcache.common.exceptions import ConfigurationError, UsageError
from fedcache.numeric import Tensor

DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step constants of a diffusion process with `T` steps.

    Arrays are stored 0-based; step `t` in `1..T` lives at index `t - 1`. `posterior_var` uses the convention
    ᾱ_0 = 1, so its first entry is zero.
    """
    T: int
    beta: Tensor
    alpha: Tensor
    alpha_bar: Tensor
    posterior_var: Tensor

    def index(self, t: Tensor | int) -> Tensor:
        """Validate 1-based steps and convert them to array indices."""
        steps = np.asarray(t, dtype=np.int64)
        if np.any(steps < 1) or np.any(steps > self.T):
            raise UsageError(f"Time step out of range 1..{self.T}")

        return steps - 1


def build_schedule(T: int, beta_start: float = DEFAULT_BETA_START, beta_end: float = DEFAULT_BETA_END) -> NoiseSchedule:
    """Linear β schedule from `beta_start` to `beta_end` over `T` steps."""
    if T < 1:
        raise ConfigurationError(f"Number of diffusion steps T must be at least 1, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise ConfigurationError(f"Expected 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")

    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    alpha_bar_prev = np.concatenate([[1.0], alpha_bar[:-1]])
    posterior_var = (1.0 - alpha_bar_prev) / (1.0 - alpha_bar) * beta

    return NoiseSchedule(T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar, posterior_var=posterior_var)


def q_sample(schedule: NoiseSchedule, x0: Tensor, t: Tensor | int, epsilon: Tensor) -> Tensor:
    """Noise clean latents to step `t`: `sqrt(ᾱ_t) x0 + sqrt(1 - ᾱ_t) ε`.

    Args:
        schedule (NoiseSchedule): The noise schedule.
        x0 (Tensor): Clean latents, a single vector or a `(batch, dim)` matrix.
        t (Tensor | int): One step for all rows, or one step per row.
        epsilon (Tensor): Standard normal noise, same shape as `x0`.

    Returns:
        The noised latents.
    """
    if x0.shape != epsilon.shape:
        raise ConfigurationError(f"Latents and noise differ in shape: {x0.shape} vs {epsilon.shape}")

    alpha_bar = schedule.alpha_bar[schedule.index(t)]
    if np.ndim(alpha_bar):
        alpha_bar = alpha_bar.reshape(alpha_bar.shape + (1,) * (x0.ndim - alpha_bar.ndim))

    return np.sqrt(alpha_bar) * x0 + np.sqrt(1.0 - alpha_bar) * epsilon
