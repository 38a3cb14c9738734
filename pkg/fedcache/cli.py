import pathlib
import sys
from collections.abc import Callable
from typing import Optional

import typer
from loguru import logger

from .common.exceptions import ConfigurationError, FedCacheError
from .common.utils.functools import split_list
from .common.utils.settings import get_settings
from .service import SWEEP_AXES, Service, get_service, run_sweep
from .settings import ExperimentConfig, Settings, load_config

DEFAULT_OUT = pathlib.Path("runs/default")


def _execute(action: Callable[[], None]):
    try:
        action()
    except FedCacheError as exc:
        logger.error("{error}", error=exc)
        raise typer.Exit(code=exc.exit_code) from exc


def _service(ctx: typer.Context, command: str, reuse: bool, dump_latents: bool = False) -> Service:
    return get_service(
        config=ctx.obj["config"],
        out=ctx.obj["out"],
        command=command,
        reuse=reuse,
        dump_latents=dump_latents,
    )


@logger.catch(exclude=typer.Exit, reraise=True)
def ingest(ctx: typer.Context):
    """Parse the ratings file and write the user split (`split.csv`: user_id,assignment) and the held-out request
    trace (`trace.csv`: movie_id)."""
    def action():
        service = _service(ctx, "ingest", reuse=True)
        service.ingest()
        service.manifest.complete(service.out)

    _execute(action)


@logger.catch(exclude=typer.Exit, reraise=True)
def pretrain_ae(ctx: typer.Context):
    """Pre-train the autoencoder on the public users (`autoencoder.flpm` plus its `.arch` descriptor)."""
    def action():
        service = _service(ctx, "pretrain-ae", reuse=False)
        service.pretrain(service.ingest().public)
        service.manifest.complete(service.out)

    _execute(action)


@logger.catch(exclude=typer.Exit, reraise=True)
def train(ctx: typer.Context):
    """Run federated training of the latent denoiser (`denoiser.flpm`, and `rounds.csv`:
    round,client_mean_loss,seconds,checksum). A saved autoencoder in the output directory is reused."""
    def action():
        service = _service(ctx, "train", reuse=True)
        split = service.ingest()
        autoencoder = service.pretrain(split.public)
        service.train(service.encode(split, autoencoder))
        service.manifest.complete(service.out)

    _execute(action)


@logger.catch(exclude=typer.Exit, reraise=True)
def predict(
        ctx: typer.Context,
        dump_latents: bool = typer.Option(False, "--dump-latents", help="Also write `latents.csv` (z0,z1,...)"),
):
    """Sample the global model and write predicted popularity (`popularity.csv`: movie_id,score). Saved models in
    the output directory are reused."""
    def action():
        service = _service(ctx, "predict", reuse=True, dump_latents=dump_latents)
        trained = service.train_models(service.ingest())
        service.predict(trained.denoiser, trained.autoencoder)
        service.manifest.complete(service.out)

    _execute(action)


@logger.catch(exclude=typer.Exit, reraise=True)
def evaluate(ctx: typer.Context):
    """Evaluate all configured policies (`results.csv`: policy,capacity,hit_percentage,mean_delay_ms,seed). Saved
    models in the output directory are reused."""
    _execute(lambda: _service(ctx, "evaluate", reuse=True).run())


@logger.catch(exclude=typer.Exit, reraise=True)
def run_all(
        ctx: typer.Context,
        dump_latents: bool = typer.Option(False, "--dump-latents", help="Also write `latents.csv` (z0,z1,...)"),
):
    """Run every stage from scratch: split.csv, trace.csv, autoencoder.flpm, denoiser.flpm, rounds.csv,
    popularity.csv, results.csv (policy,capacity,hit_percentage,mean_delay_ms,seed) and manifest.json."""
    _execute(lambda: _service(ctx, "all", reuse=False, dump_latents=dump_latents).run())


@logger.catch(exclude=typer.Exit, reraise=True)
def sweep(
        ctx: typer.Context,
        axis: str = typer.Option(..., "--axis", help=f"One of {', '.join(SWEEP_AXES)}"),
        values: Optional[str] = typer.Option(
            None,
            "--values",
            help="Comma separated axis values; the capacity axis defaults to `capacities`",
        ),
):
    """Repeat the experiment along one axis and write `sweep_<axis>.csv`:
    axis,value,policy,capacity,hit_percentage,mean_delay_ms,seed,train_seconds."""
    def action():
        try:
            parsed = [int(value) for value in split_list(values)] if values else None
        except ValueError as exc:
            raise ConfigurationError(f"Sweep values must be integers, got `{values}`") from exc

        run_sweep(ctx.obj["config"], axis, ctx.obj["out"], parsed)

    _execute(action)


def callback(
        ctx: typer.Context,
        config: Optional[pathlib.Path] = typer.Option(
            None,
            "--config", "-c",
            help="`key = value` experiment configuration file",
        ),
        seed: Optional[int] = typer.Option(None, "--seed", min=0, max=2 ** 64 - 1, help="Base seed of the run"),
        workers: Optional[int] = typer.Option(None, "--workers", min=1, help="Maximum number of worker threads"),
        out: pathlib.Path = typer.Option(DEFAULT_OUT, "--out", "-o", help="Output directory"),
        env: Optional[pathlib.Path] = typer.Option(
            None,
            "--env", "-e",
            help="`.env` file with FEDCACHE_* settings",
        ),
):
    """Federated latent diffusion for edge-cache popularity prediction.

    Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.
    """
    ctx.obj = ctx.obj or {}

    settings: Settings = ctx.obj.get("settings") or get_settings(Settings, env_file=env)
    logger.remove()
    logger.add(sys.stderr, level=settings.log_level.upper())

    try:
        experiment: ExperimentConfig = load_config(config)
        ctx.obj["config"] = experiment.with_overrides(
            seed=seed,
            workers=workers or (None if "workers" in experiment.model_fields_set else settings.workers),
            data_path=experiment.data_path or settings.data,
        )
    except FedCacheError as exc:
        logger.error("{error}", error=exc)
        raise typer.Exit(code=exc.exit_code) from exc

    ctx.obj["settings"] = settings
    ctx.obj["out"] = out


def get_cli() -> typer.Typer:
    """Create and configure the CLI.

    Returns:
        An instance of the `typer.Typer` class with one command per pipeline stage.
    """
    cli = typer.Typer()

    cli.callback()(callback)
    cli.command(name="ingest")(ingest)
    cli.command(name="pretrain-ae")(pretrain_ae)
    cli.command(name="train")(train)
    cli.command(name="predict")(predict)
    cli.command(name="evaluate")(evaluate)
    cli.command(name="sweep")(sweep)
    cli.command(name="all")(run_all)

    return cli


def main():
    get_cli()()
