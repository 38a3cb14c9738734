import pathlib

import numpy as np
from loguru import logger

from fedcache.common.exceptions import DataError, DataFormatError
from fedcache.numeric import Graph, ParameterSet, serialization

from .autoencoder import SCALER_PREFIX, AutoencoderModel, LatentScaler
from .denoiser import DenoiserModel
from .descriptor import parse_graphs, render_graphs


def architecture_path(path: pathlib.Path) -> pathlib.Path:
    return pathlib.Path(path).with_suffix(".arch")


def _check_structure(params: ParameterSet, graphs: list[Graph], path: pathlib.Path):
    expected = {}
    for graph in graphs:
        expected.update(graph.parameter_shapes())

    if params.structure() != expected:
        raise DataFormatError(f"Parameters in {path} do not match the architecture descriptor")


def _read_architecture(path: pathlib.Path) -> tuple[dict[str, Graph], dict[str, str]]:
    try:
        text = architecture_path(path).read_text()
    except OSError as exc:
        raise DataError(f"Cannot read architecture descriptor for {path}: {exc}") from exc

    return parse_graphs(text)


def save_autoencoder(path: pathlib.Path, model: AutoencoderModel):
    """Write the autoencoder parameters and latent scaler to `path` and its descriptor next to it."""
    path = pathlib.Path(path)
    serialization.save(path, model.params.merge(model.scaler.to_params()))
    architecture_path(path).write_text(render_graphs([model.encoder, model.decoder], {"kind": "autoencoder"}))

    logger.debug("Saved autoencoder to {path}", path=path)


def load_autoencoder(path: pathlib.Path, dtype: type[np.floating] = np.float64) -> AutoencoderModel:
    graphs, meta = _read_architecture(path)
    if meta.get("kind") != "autoencoder" or set(graphs) != {"encoder", "decoder"}:
        raise DataFormatError(f"{path} does not describe an autoencoder")

    stored = serialization.load(path, dtype=dtype)
    params = ParameterSet(
        (parameter.name, parameter.value) for parameter in stored if not parameter.name.startswith(SCALER_PREFIX)
    )
    _check_structure(params, [graphs["encoder"], graphs["decoder"]], path)

    return AutoencoderModel(
        encoder=graphs["encoder"],
        decoder=graphs["decoder"],
        params=params,
        scaler=LatentScaler.from_params(stored.subset(SCALER_PREFIX)),
    )


def save_denoiser(path: pathlib.Path, model: DenoiserModel):
    """Write the denoiser parameters to `path` and its descriptor next to it."""
    path = pathlib.Path(path)
    serialization.save(path, model.params)
    architecture_path(path).write_text(render_graphs([model.graph], {"kind": "denoiser", "steps": model.steps}))

    logger.debug("Saved denoiser to {path}", path=path)


def load_denoiser(path: pathlib.Path, dtype: type[np.floating] = np.float64) -> DenoiserModel:
    graphs, meta = _read_architecture(path)
    if meta.get("kind") != "denoiser" or len(graphs) != 1:
        raise DataFormatError(f"{path} does not describe a denoiser")

    (graph,) = graphs.values()
    params = serialization.load(path, dtype=dtype)
    _check_structure(params, [graph], path)

    return DenoiserModel(graph=graph, params=params, steps=int(meta["steps"]))
