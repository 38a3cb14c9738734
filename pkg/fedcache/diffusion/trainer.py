from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np
from loguru import logger

from fedcache.common.exceptions import ConfigurationError, UsageError
from fedcache.numeric import ParameterSet, Tensor, mse_loss, sgd_step

from .schedule import NoiseSchedule, q_sample


class NoisePredictor(Protocol):
    """What the diffusion machinery needs from a noise prediction model."""
    steps: int
    params: ParameterSet

    @property
    def latent_dim(self) -> int: ...

    def forward(self, x_t: Tensor, t: Tensor | int) -> tuple[Tensor, Any]: ...

    def backward(self, tape: Any, grad: Tensor) -> None: ...

    def denoise(self, x_t: Tensor, t: Tensor | int) -> Tensor: ...


@dataclass
class DiffusionTrainer:
    """Couples a noise predictor with its schedule and the random stream of its training.

    Attributes:
        schedule (NoiseSchedule): The noise schedule; its `T` is fixed for the trainer's lifetime.
        denoiser (NoisePredictor): The model being trained; its parameters are updated in place.
        rng (np.random.Generator): Source of minibatch indices, time steps and noise.
    """
    schedule: NoiseSchedule
    denoiser: NoisePredictor
    rng: np.random.Generator

    def __post_init__(self):
        if self.denoiser.steps != self.schedule.T:
            raise ConfigurationError(
                f"Denoiser serves {self.denoiser.steps} steps but the schedule has T={self.schedule.T}",
            )

    def fit(self, latents: Tensor, iterations: int, batch_size: int, learning_rate: float) -> list[float]:
        """Run `iterations` minibatch SGD steps on the simplified objective.

        Minibatches are drawn uniformly without replacement, or with replacement when fewer than `batch_size`
        latents are available.

        Returns:
            The loss of every iteration.
        """
        if len(latents) == 0:
            raise UsageError("Cannot train on an empty set of latents")

        losses = []
        replace = len(latents) < batch_size
        for iteration in range(iterations):
            batch = latents[self.rng.choice(len(latents), size=batch_size, replace=replace)]
            losses.append(training_loss(self, batch))
            sgd_step(self.denoiser.params, learning_rate)
            logger.trace("Diffusion iteration {iteration}: loss={loss:.6f}", iteration=iteration, loss=losses[-1])

        return losses


def training_loss(
        trainer: DiffusionTrainer,
        x0_batch: Tensor,
        t: Tensor | None = None,
        epsilon: Tensor | None = None,
        backward: bool = True,
) -> float:
    """Simplified DDPM objective on one batch, accumulating gradients into the denoiser.

    For each row a step `t ~ Uniform{1..T}` and noise `ε ~ N(0, I)` are drawn independently from the trainer's
    generator, unless given explicitly.

    Args:
        trainer (DiffusionTrainer): The trainer.
        x0_batch (Tensor): Clean latents of shape `(batch, dim)`.
        t (Tensor | None): Optional per-row steps overriding the random draw.
        epsilon (Tensor | None): Optional noise overriding the random draw.
        backward (bool): Whether to propagate gradients into the denoiser parameters.

    Returns:
        The mean squared error between the noise and its prediction.
    """
    x0 = np.asarray(x0_batch)
    if x0.ndim != 2 or len(x0) == 0:
        raise UsageError("Training loss needs a non-empty (batch, dim) matrix of latents")

    if t is None:
        t = trainer.rng.integers(1, trainer.schedule.T + 1, size=len(x0))
    if epsilon is None:
        epsilon = trainer.rng.standard_normal(x0.shape)

    x_t = q_sample(trainer.schedule, x0, t, epsilon)
    prediction, tape = trainer.denoiser.forward(x_t, t)
    loss, grad = mse_loss(prediction, np.asarray(epsilon, dtype=prediction.dtype))
    if backward:
        trainer.denoiser.backward(tape, grad)

    return loss
