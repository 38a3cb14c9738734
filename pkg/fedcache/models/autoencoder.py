from dataclasses import dataclass

import numpy as np
from loguru import logger
from pydantic import BaseModel, NonNegativeFloat, PositiveInt

from fedcache.common.exceptions import ConfigurationError
from fedcache.numeric import Graph, LayerSpec, Node, ParameterSet, Tensor, backward, forward, mse_loss, sgd_step

LATENT_STD_FLOOR = 1e-6
SCALER_PREFIX = "latent_scaler."


class AutoencoderSettings(BaseModel):
    """Settings for the pre-trained autoencoder.

    Attributes:
        features (PositiveInt): Content library size F.
        hidden (PositiveInt): Width of the hidden layer of both encoder and decoder.
        latent_dim (PositiveInt): Latent dimension.
        epochs (PositiveInt): Pre-training epochs over the public data.
        learning_rate (NonNegativeFloat): SGD step size.
        batch_size (PositiveInt): Minibatch size.
        standardize (bool): Whether to fit a `LatentScaler` on the public latents.
    """
    features: PositiveInt = 3952
    hidden: PositiveInt = 100
    latent_dim: PositiveInt = 16
    epochs: PositiveInt = 200
    learning_rate: NonNegativeFloat = 0.01
    batch_size: PositiveInt = 64
    standardize: bool = True


def build_encoder_graph(features: int, hidden: int, latent_dim: int) -> Graph:
    return Graph("encoder", (features,), [
        Node("encoder.hidden", LayerSpec(kind="dense", fan_in=features, fan_out=hidden)),
        Node("encoder.hidden_act", LayerSpec(kind="relu"), ("encoder.hidden",)),
        Node("encoder.latent", LayerSpec(kind="dense", fan_in=hidden, fan_out=latent_dim), ("encoder.hidden_act",)),
    ])


def build_decoder_graph(features: int, hidden: int, latent_dim: int) -> Graph:
    return Graph("decoder", (latent_dim,), [
        Node("decoder.hidden", LayerSpec(kind="dense", fan_in=latent_dim, fan_out=hidden)),
        Node("decoder.hidden_act", LayerSpec(kind="relu"), ("decoder.hidden",)),
        Node("decoder.output", LayerSpec(kind="dense", fan_in=hidden, fan_out=features), ("decoder.hidden_act",)),
        Node("decoder.output_act", LayerSpec(kind="sigmoid"), ("decoder.output",)),
    ])


@dataclass
class LatentScaler:
    """Per-dimension standardization of latents.

    Fitted by the base station on the encoded public data and shipped with the autoencoder, so clients and the
    base station agree on the latent scale the diffusion model works in.
    """
    mean: Tensor
    std: Tensor

    @classmethod
    def identity(cls, latent_dim: int, dtype: type[np.floating] = np.float64) -> "LatentScaler":
        return cls(mean=np.zeros(latent_dim, dtype=dtype), std=np.ones(latent_dim, dtype=dtype))

    @classmethod
    def fit(cls, latents: Tensor) -> "LatentScaler":
        return cls(mean=latents.mean(axis=0), std=np.maximum(latents.std(axis=0), LATENT_STD_FLOOR))

    def transform(self, latents: Tensor) -> Tensor:
        return (latents - self.mean) / self.std

    def inverse(self, latents: Tensor) -> Tensor:
        return latents * self.std + self.mean

    def to_params(self) -> ParameterSet:
        return ParameterSet([(f"{SCALER_PREFIX}mean", self.mean), (f"{SCALER_PREFIX}std", self.std)])

    @classmethod
    def from_params(cls, params: ParameterSet) -> "LatentScaler":
        return cls(mean=params[f"{SCALER_PREFIX}mean"].copy(), std=params[f"{SCALER_PREFIX}std"].copy())


@dataclass
class AutoencoderModel:
    """Pre-trained encoder E and decoder D sharing one parameter set.

    Attributes:
        encoder (Graph): `F -> hidden -> latent_dim`, ReLU after the hidden layer.
        decoder (Graph): `latent_dim -> hidden -> F`, ReLU after the hidden layer and a sigmoid output.
        params (ParameterSet): Parameters of both graphs, prefixed `encoder.` and `decoder.`.
        scaler (LatentScaler): Latent standardization fitted on the public data.
    """
    encoder: Graph
    decoder: Graph
    params: ParameterSet
    scaler: LatentScaler

    @property
    def features(self) -> int:
        return self.encoder.input_shape[0]

    @property
    def latent_dim(self) -> int:
        return self.decoder.input_shape[0]

    def _run(self, graph: Graph, values: Tensor) -> Tensor:
        values = np.asarray(values)
        if values.ndim not in (1, 2) or values.shape[-1] != graph.input_shape[0]:
            raise ConfigurationError(
                f"{graph.name.capitalize()} expects vectors of dimension {graph.input_shape[0]}, "
                f"got shape {values.shape}",
            )

        out, _ = forward(self.params, graph, np.atleast_2d(values))
        return out[0] if values.ndim == 1 else out

    def encode(self, ratings: Tensor) -> Tensor:
        return self._run(self.encoder, ratings)

    def decode(self, latent: Tensor) -> Tensor:
        return self._run(self.decoder, latent)


def init_autoencoder(
        settings: AutoencoderSettings,
        rng: np.random.Generator,
        dtype: type[np.floating] = np.float64,
) -> AutoencoderModel:
    encoder = build_encoder_graph(settings.features, settings.hidden, settings.latent_dim)
    decoder = build_decoder_graph(settings.features, settings.hidden, settings.latent_dim)
    params = encoder.init_params(rng, dtype).merge(decoder.init_params(rng, dtype))

    return AutoencoderModel(
        encoder=encoder,
        decoder=decoder,
        params=params,
        scaler=LatentScaler.identity(settings.latent_dim, dtype),
    )


def encode(model: AutoencoderModel, ratings: Tensor) -> Tensor:
    """Map normalized rating vectors of dimension F (or a batch of them) to latents."""
    return model.encode(ratings)


def decode(model: AutoencoderModel, latent: Tensor) -> Tensor:
    """Map latents (or a batch of them) back to rating vectors in [0, 1]."""
    return model.decode(latent)


def reconstruction_error(model: AutoencoderModel, data: Tensor, batch_size: int = 1024) -> float:
    """Mean squared reconstruction error per element over `data`."""
    total = 0.0
    for start in range(0, len(data), batch_size):
        batch = data[start:start + batch_size]
        diff = model.decode(model.encode(batch)) - batch
        total += float(np.sum(diff * diff))

    return total / data.size


def pretrain_autoencoder(
        public_data: Tensor,
        settings: AutoencoderSettings,
        seed: int,
        dtype: type[np.floating] = np.float64,
) -> AutoencoderModel:
    """Train the autoencoder at the base station on public rating vectors.

    The objective is the squared reconstruction error summed over the F features and averaged over the minibatch,
    minimized with plain SGD. After training, a `LatentScaler` is fitted on the encoded public data when
    `settings.standardize` is set.

    Args:
        public_data (Tensor): Matrix of shape `(users, F)` with values in [0, 1].
        settings (AutoencoderSettings): Architecture and optimization settings.
        seed (int): Seed of initialization and minibatch shuffling.
        dtype (type[np.floating]): Floating point precision of the parameters.

    Returns:
        The trained `AutoencoderModel`.
    """
    data = np.asarray(public_data, dtype=dtype)
    if data.ndim != 2 or len(data) == 0:
        raise ConfigurationError("Autoencoder pre-training needs a non-empty matrix of public rating vectors")
    if data.shape[1] != settings.features:
        raise ConfigurationError(f"Public vectors have dimension {data.shape[1]}, expected {settings.features}")
    if data.min() < 0 or data.max() > 1:
        raise ConfigurationError("Public rating vectors must lie in [0, 1]")

    rng = np.random.default_rng(seed)
    model = init_autoencoder(settings, rng, dtype)
    initial_error = reconstruction_error(model, data)

    logger.info(
        "Pre-training autoencoder on {users} public users for {epochs} epochs",
        users=len(data),
        epochs=settings.epochs,
    )
    for epoch in range(settings.epochs):
        order = rng.permutation(len(data))
        epoch_loss = 0.0
        for start in range(0, len(data), settings.batch_size):
            batch = data[order[start:start + settings.batch_size]]
            latent, encoder_tape = forward(model.params, model.encoder, batch)
            reconstruction, decoder_tape = forward(model.params, model.decoder, latent)
            loss, grad = mse_loss(reconstruction, batch, reduction="sample")
            backward(encoder_tape, backward(decoder_tape, grad))
            sgd_step(model.params, settings.learning_rate)
            epoch_loss += loss * len(batch)

        logger.debug("Autoencoder epoch {epoch}: loss={loss:.6f}", epoch=epoch + 1, loss=epoch_loss / len(data))

    final_error = reconstruction_error(model, data)
    logger.info(
        "Autoencoder reconstruction MSE {initial:.6f} -> {final:.6f}",
        initial=initial_error,
        final=final_error,
    )

    if settings.standardize:
        model.scaler = LatentScaler.fit(model.encode(data))

    return model
