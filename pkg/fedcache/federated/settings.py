from enum import Enum

from pydantic import BaseModel, NonNegativeFloat, NonNegativeInt, PositiveInt

from fedcache.diffusion.schedule import DEFAULT_BETA_END, DEFAULT_BETA_START


class AggregationMode(str, Enum):
    """How the base station folds uploaded models into the global model.

    `fedavg` treats every upload as an update relative to the broadcast model, which at `server_lr = 1` is the
    data-size-weighted average of the local models. `literal-eq9` subtracts the weighted sum of the uploaded models
    themselves; it is kept for comparison and diverges for any non-zero model.
    """
    FEDAVG = "fedavg"
    LITERAL = "literal-eq9"


class FederationConfig(BaseModel):
    """Settings of the simulated federated training.

    Attributes:
        clients (PositiveInt): Number of participating clients I.
        rounds (NonNegativeInt): Number of communication rounds R_max.
        local_iterations (NonNegativeInt): Local SGD iterations e per round.
        batch_size (PositiveInt): Local minibatch size.
        eta_d (NonNegativeFloat): Local learning rate.
        server_lr (NonNegativeFloat): Server step size η of the aggregation.
        T (PositiveInt): Number of diffusion steps.
        beta_start (float): First β of the linear schedule.
        beta_end (float): Last β of the linear schedule.
        aggregation_mode (AggregationMode): The aggregation rule.
        seed (NonNegativeInt): Base seed of all client random streams.
        workers (PositiveInt): Maximum number of clients training concurrently.
    """
    clients: PositiveInt = 20
    rounds: NonNegativeInt = 30
    local_iterations: NonNegativeInt = 30
    batch_size: PositiveInt = 32
    eta_d: NonNegativeFloat = 0.0006
    server_lr: NonNegativeFloat = 1.0
    T: PositiveInt = 50
    beta_start: float = DEFAULT_BETA_START
    beta_end: float = DEFAULT_BETA_END
    aggregation_mode: AggregationMode = AggregationMode.FEDAVG
    seed: NonNegativeInt = 0
    workers: PositiveInt = 1
