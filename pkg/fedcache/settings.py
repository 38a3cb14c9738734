import pathlib
from typing import Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from .cachesim import DelayModel
from .common.exceptions import ConfigurationError, DataError
from .common.utils.functools import split_list
from .data import SplitPlan
from .diffusion.schedule import DEFAULT_BETA_END, DEFAULT_BETA_START
from .federated import AggregationMode, FederationConfig
from .models import AutoencoderSettings
from .numeric import DTYPES

Policy = Literal["ldpm", "raw-ldpm", "oracle", "thompson", "random"]

LIST_KEYS = {"capacities", "policies", "denoiser_widths", "raw_widths"}


class ExperimentConfig(BaseModel):
    """Every knob of an experiment, validated at load.

    Keys follow the names used in configuration files, e.g. `T = 50` or `capacities = 50, 100, 150`.

    Attributes:
        data_path (pathlib.Path | None): The ml-1m `ratings.dat` file; falls back to `FEDCACHE_DATA`.
        seed (NonNegativeInt): Base seed of every random stream of the run.
        F (PositiveInt): Content library size.
        I (PositiveInt): Number of federated clients.
        R_max (NonNegativeInt): Communication rounds.
        e (NonNegativeInt): Local iterations per round.
        batch_size (PositiveInt): Local minibatch size.
        eta_d (NonNegativeFloat): Local learning rate of the denoiser.
        server_lr (NonNegativeFloat): Server step size of the aggregation.
        T (PositiveInt): Diffusion steps.
        beta_start (float): First β of the linear schedule.
        beta_end (float): Last β of the linear schedule.
        U (PositiveInt): Generated samples used to predict popularity.
        N (PositiveInt): Cache capacity of the single-capacity report.
        capacities (list[PositiveInt]): Capacities of the sweep, strictly ascending.
        public_fraction (float): Share of users reserved for autoencoder pre-training.
        train_fraction (float): Share of every user's ratings used for training.
        ae_epochs (PositiveInt): Autoencoder pre-training epochs.
        ae_lr (NonNegativeFloat): Autoencoder learning rate.
        ae_hidden (PositiveInt): Autoencoder hidden width.
        ae_batch_size (PositiveInt): Autoencoder minibatch size.
        latent_dim (PositiveInt): Latent dimension.
        latent_standardize (bool): Whether latents are standardized with statistics of the public data.
        d_hit (PositiveFloat): Delay of a cache hit, in milliseconds.
        d_miss (PositiveFloat): Delay of a cache miss, in milliseconds.
        aggregation_mode (AggregationMode): The aggregation rule.
        policies (list[Policy]): Policies evaluated by `evaluate` and `sweep`.
        precision (str): Floating point precision of all parameters.
        denoiser_widths (list[PositiveInt]): Channel widths of the U-Net resolutions.
        time_embedding_dim (PositiveInt): Width of the sinusoidal time embedding.
        sample_chunk_size (PositiveInt): Samples generated per parallel chunk.
        thompson_epochs (PositiveInt): Trace slices of the Thompson sampling baseline.
        raw_widths (list[PositiveInt]): U-Net widths of the raw-space baseline.
        raw_rounds (NonNegativeInt): Communication rounds of the raw-space baseline.
        workers (PositiveInt): Worker threads for clients, sampling chunks and sweep cells.
        strict_data (bool): Whether a ratings file other than the canonical ml-1m file is an error.
    """
    model_config = ConfigDict(extra="forbid")

    data_path: pathlib.Path | None = None
    seed: NonNegativeInt = 0
    F: PositiveInt = 3952
    I: PositiveInt = 20
    R_max: NonNegativeInt = 30
    e: NonNegativeInt = 30
    batch_size: PositiveInt = 32
    eta_d: NonNegativeFloat = 0.0006
    server_lr: NonNegativeFloat = 1.0
    T: PositiveInt = 50
    beta_start: float = Field(default=DEFAULT_BETA_START, gt=0.0, lt=1.0)
    beta_end: float = Field(default=DEFAULT_BETA_END, gt=0.0, lt=1.0)
    U: PositiveInt = 1000
    N: PositiveInt = 100
    capacities: list[PositiveInt] = [50, 100, 150, 200, 250, 300, 350, 400, 450, 500]
    public_fraction: float = Field(default=0.20, ge=0.0, lt=1.0)
    train_fraction: float = Field(default=0.80, gt=0.0, le=1.0)
    ae_epochs: PositiveInt = 200
    ae_lr: NonNegativeFloat = 0.01
    ae_hidden: PositiveInt = 100
    ae_batch_size: PositiveInt = 64
    latent_dim: PositiveInt = 16
    latent_standardize: bool = True
    d_hit: PositiveFloat = 10.0
    d_miss: PositiveFloat = 50.0
    aggregation_mode: AggregationMode = AggregationMode.FEDAVG
    policies: list[Policy] = ["ldpm", "raw-ldpm", "oracle", "thompson", "random"]
    precision: Literal["float64", "float32"] = "float64"
    denoiser_widths: list[PositiveInt] = [32, 64, 128]
    time_embedding_dim: PositiveInt = 64
    sample_chunk_size: PositiveInt = 250
    thompson_epochs: PositiveInt = 10
    raw_widths: list[PositiveInt] = [8, 16, 32]
    raw_rounds: NonNegativeInt = 5
    workers: PositiveInt = 1
    strict_data: bool = False

    @field_validator("capacities", "policies", "denoiser_widths", "raw_widths", mode="before")
    @classmethod
    def split_lists(cls, value):
        return split_list(value)

    @field_validator("capacities")
    @classmethod
    def check_capacities(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("at least one capacity is required")
        if any(later <= earlier for earlier, later in zip(value, value[1:])):
            raise ValueError("capacities must be strictly ascending")
        return value

    @field_validator("policies", "denoiser_widths", "raw_widths")
    @classmethod
    def check_not_empty(cls, value: list) -> list:
        if not value:
            raise ValueError("at least one entry is required")
        return value

    @field_validator("time_embedding_dim")
    @classmethod
    def check_even(cls, value: int) -> int:
        if value % 2:
            raise ValueError("time embedding dimension must be even")
        return value

    @model_validator(mode="after")
    def check_consistency(self) -> "ExperimentConfig":
        if self.beta_start > self.beta_end:
            raise ValueError(f"beta_start ({self.beta_start}) exceeds beta_end ({self.beta_end})")
        if self.d_hit >= self.d_miss:
            raise ValueError(f"d_hit ({self.d_hit}) must be smaller than d_miss ({self.d_miss})")
        if self.N > self.F or self.capacities[-1] > self.F:
            raise ValueError(f"cache capacities (N and capacities) must not exceed F={self.F}")

        factor = 2 ** (len(self.denoiser_widths) - 1)
        if self.latent_dim % factor:
            raise ValueError(f"latent_dim ({self.latent_dim}) must be divisible by {factor} for denoiser_widths")
        factor = 2 ** (len(self.raw_widths) - 1)
        if "raw-ldpm" in self.policies and self.F % factor:
            raise ValueError(f"F ({self.F}) must be divisible by {factor} for raw_widths")

        return self

    @property
    def dtype(self):
        return DTYPES[self.precision]

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Return a validated copy with some keys replaced; `None` values are ignored."""
        values = self.model_dump()
        values.update({key: value for key, value in overrides.items() if value is not None})
        try:
            return ExperimentConfig.model_validate(values)
        except ValidationError as exc:
            raise ConfigurationError(_describe(exc)) from exc

    def federation(self, rounds: int | None = None) -> FederationConfig:
        return FederationConfig(
            clients=self.I,
            rounds=self.R_max if rounds is None else rounds,
            local_iterations=self.e,
            batch_size=self.batch_size,
            eta_d=self.eta_d,
            server_lr=self.server_lr,
            T=self.T,
            beta_start=self.beta_start,
            beta_end=self.beta_end,
            aggregation_mode=self.aggregation_mode,
            seed=self.seed,
            workers=self.workers,
        )

    def split_plan(self) -> SplitPlan:
        return SplitPlan(
            seed=self.seed,
            public_fraction=self.public_fraction,
            clients=self.I,
            train_fraction=self.train_fraction,
        )

    def delay_model(self) -> DelayModel:
        return DelayModel(d_hit=self.d_hit, d_miss=self.d_miss)

    def autoencoder_settings(self) -> AutoencoderSettings:
        return AutoencoderSettings(
            features=self.F,
            hidden=self.ae_hidden,
            latent_dim=self.latent_dim,
            epochs=self.ae_epochs,
            learning_rate=self.ae_lr,
            batch_size=self.ae_batch_size,
            standardize=self.latent_standardize,
        )


class Settings(BaseModel):
    """Process level settings read from `FEDCACHE_*` environment variables.

    Attributes:
        data (pathlib.Path | None): Fallback location of the ratings file (`FEDCACHE_DATA`).
        workers (PositiveInt | None): Default worker count (`FEDCACHE_WORKERS`).
        log_level (str): Level of the stderr log sink (`FEDCACHE_LOG_LEVEL`).
    """
    data: pathlib.Path | None = None
    workers: PositiveInt | None = None
    log_level: str = "INFO"


def _describe(exc: ValidationError, lines: dict[str, int] | None = None) -> str:
    error = exc.errors()[0]
    key = str(error["loc"][0]) if error["loc"] else None
    where = f" on line {lines[key]}" if lines and key in lines else ""
    subject = f"`{key}`{where}" if key else "configuration"

    return f"Invalid {subject}: {error['msg']}"


def parse_config_text(text: str) -> tuple[dict[str, str], dict[str, int]]:
    """Split `key = value` lines into raw values and the line number of every key.

    Blank lines and `#` comments are ignored. Unknown and repeated keys are rejected.
    """
    values, lines = {}, {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"Line {number}: expected `key = value`, got `{line}`")

        key, value = (part.strip() for part in line.split("=", 1))
        if key not in ExperimentConfig.model_fields:
            raise ConfigurationError(f"Unknown key `{key}` on line {number}")
        if key in values:
            raise ConfigurationError(f"Key `{key}` on line {number} repeats line {lines[key]}")

        values[key] = value
        lines[key] = number

    return values, lines


def load_config(path: pathlib.Path | None = None) -> ExperimentConfig:
    """Read and validate an experiment configuration file.

    Args:
        path (pathlib.Path | None): The configuration file. Without a path every key takes its default.

    Returns:
        The validated configuration.

    Raises:
        ConfigurationError: The file holds an unknown key, a malformed line or an invalid value. The message names
            the key and its line.
        DataError: The file cannot be read.
    """
    if path is None:
        return ExperimentConfig()

    try:
        text = pathlib.Path(path).read_text()
    except OSError as exc:
        raise DataError(f"Cannot read configuration {path}: {exc}") from exc

    values, lines = parse_config_text(text)
    try:
        return ExperimentConfig.model_validate(values)
    except ValidationError as exc:
        raise ConfigurationError(_describe(exc, lines)) from exc
