import pathlib
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from loguru import logger

from . import cachesim, data, diffusion, federated, models
from .common.exceptions import ConfigurationError
from .common.utils.seeding import derive_seed
from .manifest import RunManifest
from .numeric import Tensor
from .settings import ExperimentConfig

SWEEP_AXES = ("T", "capacity", "clients")
SWEEP_COLUMNS = ["axis", "value", *cachesim.RESULT_COLUMNS, "train_seconds"]


@dataclass
class RunResult:
    """What a full pipeline run hands back to its caller.

    Attributes:
        evaluations (list[cachesim.Evaluation]): One row per policy and capacity.
        train_seconds (float): Total wall clock time of the federated rounds.
    """
    evaluations: list[cachesim.Evaluation]
    train_seconds: float = 0.0


@dataclass
class TrainedModels:
    autoencoder: models.AutoencoderModel
    denoiser: models.DenoiserModel
    reports: list[federated.RoundReport] = field(default_factory=list)


class Service:
    """Runs the stages of an experiment and writes their artifacts.

    Stages are `ingest`, `pretrain`, `train`, `predict`, `raw_baseline` and `evaluate`. Every stage is tracked in
    the run manifest. When `reuse` is set, stages that produce a model load it from the run directory instead of
    training it again.

    Attributes:
        _config (ExperimentConfig): The experiment configuration.
        _out (pathlib.Path): The run directory.
        _manifest (RunManifest): The manifest of the run.
    """

    def __init__(
            self,
            config: ExperimentConfig,
            out: pathlib.Path,
            command: str = "all",
            reuse: bool = False,
            dump_latents: bool = False,
    ):
        """Initialize the service and write the initial manifest.

        Args:
            config (ExperimentConfig): The experiment configuration; `data_path` must be set.
            out (pathlib.Path): The run directory; created when missing.
            command (str): Name of the command recorded in the manifest.
            reuse (bool): Whether saved models in `out` replace training.
            dump_latents (bool): Whether generated latents are written to `latents.csv`.
        """
        if config.data_path is None:
            raise ConfigurationError("No ratings file given: set `data_path` or FEDCACHE_DATA")

        self._config = config
        self._out = pathlib.Path(out)
        self._reuse = reuse
        self._dump_latents = dump_latents

        self._out.mkdir(parents=True, exist_ok=True)
        self._manifest = RunManifest(command=command, config=config.model_dump(mode="json"))
        self._manifest.write(self._out)

    @property
    def config(self) -> ExperimentConfig:
        return self._config

    @property
    def out(self) -> pathlib.Path:
        return self._out

    @property
    def manifest(self) -> RunManifest:
        return self._manifest

    def _path(self, name: str) -> pathlib.Path:
        return self._out / name

    def _emit(self, path: pathlib.Path):
        self._manifest.add_file(self._out, path)

    def _save_autoencoder(self, path: pathlib.Path, model: models.AutoencoderModel):
        models.save_autoencoder(path, model)
        self._emit(path)
        self._emit(models.architecture_path(path))

    def _save_denoiser(self, path: pathlib.Path, model: models.DenoiserModel):
        models.save_denoiser(path, model)
        self._emit(path)
        self._emit(models.architecture_path(path))

    def _reusable(self, path: pathlib.Path) -> bool:
        if self._reuse and path.exists():
            logger.info("Reusing {path}", path=path)
            return True
        return False

    def ingest(self) -> data.DatasetSplit:
        """Parse the ratings file, split it and write `split.csv` and `trace.csv`."""
        with self._manifest.stage("ingest", self._out):
            dataset = data.parse_movielens(self._config.data_path, self._config.F, strict=self._config.strict_data)
            split = data.make_split(dataset, self._config.split_plan())

            data.write_split_manifest(self._path("split.csv"), split)
            self._emit(self._path("split.csv"))
            data.write_trace_csv(self._path("trace.csv"), split.trace)
            self._emit(self._path("trace.csv"))

        return split

    def pretrain(self, public: data.UserVectors) -> models.AutoencoderModel:
        """Pre-train the autoencoder on the public users and write `autoencoder.flpm`."""
        path = self._path("autoencoder.flpm")
        with self._manifest.stage("pretrain", self._out):
            if self._reusable(path):
                return models.load_autoencoder(path, self._config.dtype)

            model = models.pretrain_autoencoder(
                public.matrix,
                self._config.autoencoder_settings(),
                seed=derive_seed(self._config.seed, "autoencoder"),
                dtype=self._config.dtype,
            )
            self._save_autoencoder(path, model)

        return model

    def encode(self, split: data.DatasetSplit, autoencoder: models.AutoencoderModel) -> list[federated.ClientState]:
        """Turn every client partition into latents; raw vectors are not used past this point."""
        with self._manifest.stage("encode", self._out):
            return federated.encode_clients(
                [partition.matrix for partition in split.clients],
                federated.autoencoder_encoder(autoencoder),
            )

    def _federate(
            self,
            clients: Sequence[federated.ClientState],
            latent_dim: int,
            widths: Sequence[int],
            rounds: int,
            stream: str,
            path: pathlib.Path,
            reports_path: pathlib.Path,
    ) -> tuple[models.DenoiserModel, list[federated.RoundReport]]:
        if self._reusable(path):
            model = models.load_denoiser(path, self._config.dtype)
            if model.steps != self._config.T or model.latent_dim != latent_dim:
                raise ConfigurationError(f"{path} was trained for T={model.steps}, latent_dim={model.latent_dim}")
            return model, []

        initial = models.init_denoiser(
            latent_dim=latent_dim,
            steps=self._config.T,
            seed=derive_seed(self._config.seed, stream),
            widths=widths,
            time_dim=self._config.time_embedding_dim,
            dtype=self._config.dtype,
        )
        logger.info("Denoiser `{stream}` has {count} parameters", stream=stream, count=initial.param_count)

        federation = self._config.federation(rounds=rounds)
        if stream != "denoiser":
            federation = federation.model_copy(update={"seed": derive_seed(self._config.seed, stream)})

        model, reports = federated.run_training(clients, federation, initial)
        self._save_denoiser(path, model)
        federated.write_round_reports(reports_path, reports)
        self._emit(reports_path)

        return model, reports

    def train(
            self,
            clients: Sequence[federated.ClientState],
    ) -> tuple[models.DenoiserModel, list[federated.RoundReport]]:
        """Train the latent denoiser with federated averaging; writes `denoiser.flpm` and `rounds.csv`."""
        with self._manifest.stage("train", self._out):
            return self._federate(
                clients,
                latent_dim=self._config.latent_dim,
                widths=self._config.denoiser_widths,
                rounds=self._config.R_max,
                stream="denoiser",
                path=self._path("denoiser.flpm"),
                reports_path=self._path("rounds.csv"),
            )

    def _generate(self, denoiser: models.DenoiserModel, stream: str) -> Tensor:
        return diffusion.sample(
            diffusion.build_schedule(self._config.T, self._config.beta_start, self._config.beta_end),
            denoiser,
            count=self._config.U,
            seed=derive_seed(self._config.seed, stream),
            workers=self._config.workers,
            chunk_size=self._config.sample_chunk_size,
        )

    def predict(
            self,
            denoiser: models.DenoiserModel,
            autoencoder: models.AutoencoderModel,
    ) -> cachesim.PopularityScores:
        """Sample the global model, decode the samples and write `popularity.csv`.

        Only the global denoiser and the pre-trained decoder are consulted.
        """
        with self._manifest.stage("predict", self._out):
            latents = self._generate(denoiser, "sample")
            if self._dump_latents:
                write_path = self._path("latents.csv")
                diffusion.write_latents_csv(write_path, latents)
                self._emit(write_path)

            scores = cachesim.predict_popularity(
                lambda samples: autoencoder.decode(autoencoder.scaler.inverse(samples)),
                latents,
            )
            cachesim.write_popularity_csv(self._path("popularity.csv"), scores)
            self._emit(self._path("popularity.csv"))

        return scores

    def raw_baseline(self, split: data.DatasetSplit) -> cachesim.PopularityScores:
        """Run the same federated diffusion pipeline directly on the F-dimensional rating vectors.

        Encoder and decoder are identity maps; decoded samples are clipped to [0, 1]. The model is smaller
        (`raw_widths`) and trains for `raw_rounds` rounds.
        """
        with self._manifest.stage("raw-baseline", self._out):
            clients = federated.encode_clients(
                [partition.matrix for partition in split.clients],
                lambda vectors: np.array(vectors, copy=True),
            )
            denoiser, _ = self._federate(
                clients,
                latent_dim=self._config.F,
                widths=self._config.raw_widths,
                rounds=self._config.raw_rounds,
                stream="raw-denoiser",
                path=self._path("raw_denoiser.flpm"),
                reports_path=self._path("raw_rounds.csv"),
            )
            samples = self._generate(denoiser, "raw-sample")

            return cachesim.predict_popularity(lambda values: np.clip(values, 0.0, 1.0), samples)

    def policies(
            self,
            trace: data.RequestTrace,
            scores: dict[str, cachesim.PopularityScores],
    ) -> list[cachesim.CachePolicy]:
        """Build the configured policies, in configuration order."""
        result = []
        for name in self._config.policies:
            if name in scores:
                result.append(cachesim.popularity_policy(name, scores[name]))
            elif name == "oracle":
                result.append(cachesim.oracle(trace))
            elif name == "thompson":
                result.append(cachesim.ThompsonPolicy(features=self._config.F, epochs=self._config.thompson_epochs))
            elif name == "random":
                result.append(cachesim.RandomPolicy(features=self._config.F))
            else:
                raise ConfigurationError(f"No popularity scores for policy `{name}`")

        return result

    def evaluate(
            self,
            trace: data.RequestTrace,
            scores: dict[str, cachesim.PopularityScores],
            capacities: Sequence[int] | None = None,
    ) -> list[cachesim.Evaluation]:
        """Evaluate every policy at every capacity and write `results.csv`."""
        with self._manifest.stage("evaluate", self._out):
            evaluations = cachesim.sweep(
                self.policies(trace, scores),
                capacities or self._config.capacities,
                trace,
                self._config.delay_model(),
                seed=self._config.seed,
                workers=self._config.workers,
            )
            cachesim.write_evaluations(self._path("results.csv"), evaluations)
            self._emit(self._path("results.csv"))

        for evaluation in evaluations:
            if evaluation.capacity == self._config.N:
                logger.info(
                    "{policy}: {hits:.2f}% hits, {delay:.2f} ms at capacity {capacity}",
                    policy=evaluation.policy, hits=evaluation.hit_percentage, delay=evaluation.mean_delay_ms,
                    capacity=evaluation.capacity,
                )

        return evaluations

    def train_models(self, split: data.DatasetSplit) -> TrainedModels:
        autoencoder = self.pretrain(split.public)
        clients = self.encode(split, autoencoder)
        denoiser, reports = self.train(clients)

        return TrainedModels(autoencoder=autoencoder, denoiser=denoiser, reports=reports)

    def run(self, capacities: Sequence[int] | None = None) -> RunResult:
        """Run every stage, from the ratings file to `results.csv`."""
        split = self.ingest()
        trained = self.train_models(split)

        scores = {}
        if "ldpm" in self._config.policies:
            scores["ldpm"] = self.predict(trained.denoiser, trained.autoencoder)
        if "raw-ldpm" in self._config.policies:
            scores["raw-ldpm"] = self.raw_baseline(split)

        evaluations = self.evaluate(split.trace, scores, capacities)
        self._manifest.complete(self._out)

        return RunResult(
            evaluations=evaluations,
            train_seconds=sum(report.seconds for report in trained.reports),
        )


def get_service(
        config: ExperimentConfig,
        out: pathlib.Path,
        command: str = "all",
        reuse: bool = False,
        dump_latents: bool = False,
) -> Service:
    """Create the service of one run."""
    return Service(config=config, out=out, command=command, reuse=reuse, dump_latents=dump_latents)


def run_pipeline(config: ExperimentConfig, out: pathlib.Path, dump_latents: bool = False) -> RunResult:
    """Run the full experiment into `out`."""
    return get_service(config, out, command="all", dump_latents=dump_latents).run()


def _sweep_rows(axis: str, value: int, result: RunResult) -> list[dict]:
    return [
        {"axis": axis, "value": value, **evaluation.model_dump(), "train_seconds": result.train_seconds}
        for evaluation in result.evaluations
    ]


def run_sweep(
        config: ExperimentConfig,
        axis: str,
        out: pathlib.Path,
        values: Sequence[int] | None = None,
) -> pd.DataFrame:
    """Repeat the experiment along one axis and write `sweep_<axis>.csv`.

    The `capacity` axis trains once and evaluates every capacity, since training does not depend on the cache
    size. The `T` and `clients` axes run one full pipeline per value into `<out>/<axis>=<value>/`.

    Args:
        config (ExperimentConfig): The base configuration.
        axis (str): One of `T`, `capacity` and `clients`.
        out (pathlib.Path): The sweep directory.
        values (Sequence[int] | None): Axis values; defaults to `capacities` for the capacity axis.

    Returns:
        The merged long-format table.
    """
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"Unknown sweep axis `{axis}`, expected one of {', '.join(SWEEP_AXES)}")
    out = pathlib.Path(out)
    path = out / f"sweep_{axis}.csv"

    if axis == "capacity":
        capacities = list(values or config.capacities)
        service = get_service(config.with_overrides(capacities=capacities), out, command="sweep")
        result = service.run()
        rows = [
            {"axis": axis, "value": evaluation.capacity, **evaluation.model_dump(),
             "train_seconds": result.train_seconds}
            for evaluation in result.evaluations
        ]
        table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
        with service.manifest.stage("merge", out):
            table.to_csv(path, index=False)
            service.manifest.add_file(out, path)
        service.manifest.complete(out)

        return table

    if not values:
        raise ConfigurationError(f"Sweep along `{axis}` needs at least one value")

    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command="sweep", config=config.model_dump(mode="json"))
    manifest.write(out)

    rows = []
    for value in values:
        key = "T" if axis == "T" else "I"
        with manifest.stage(f"{axis}={value}", out):
            result = run_pipeline(config.with_overrides(**{key: value}), out / f"{axis}={value}")
        rows.extend(_sweep_rows(axis, value, result))
        logger.info("Sweep {axis}={value}: trained in {seconds:.1f}s", axis=axis, value=value,
                    seconds=result.train_seconds)

    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    with manifest.stage("merge", out):
        table.to_csv(path, index=False)
        manifest.add_file(out, path)
    manifest.complete(out)

    return table
