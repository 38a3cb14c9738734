from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from fedcache.common.exceptions import ConfigurationError, UsageError
from fedcache.numeric import INPUT, TIME, Graph, LayerSpec, Node, ParameterSet, Tensor, backward, forward

Architecture = Literal["unet", "mlp"]

DEFAULT_WIDTHS = (32, 64, 128)


class _GraphBuilder:

    def __init__(self):
        self.nodes: list[Node] = []

    def add(self, name: str, spec: LayerSpec, *inputs: str) -> str:
        self.nodes.append(Node(name, spec, tuple(inputs) or (INPUT,)))
        return name

    def dense(self, name: str, fan_in: int, fan_out: int, source: str) -> str:
        return self.add(name, LayerSpec(kind="dense", fan_in=fan_in, fan_out=fan_out), source)

    def conv(self, name: str, in_channels: int, out_channels: int, source: str, kernel: int = 3) -> str:
        spec = LayerSpec(kind="conv1d", in_channels=in_channels, out_channels=out_channels, kernel=kernel)
        return self.add(name, spec, source)

    def silu(self, name: str, source: str) -> str:
        return self.add(name, LayerSpec(kind="silu"), source)

    def residual_block(self, name: str, source: str, in_channels: int, out_channels: int, time: str,
                       time_dim: int) -> str:
        h = self.add(f"{name}.norm1", LayerSpec(kind="layer-norm", channels=in_channels), source)
        h = self.silu(f"{name}.act1", h)
        h = self.conv(f"{name}.conv1", in_channels, out_channels, h)
        t = self.dense(f"{name}.time", time_dim, out_channels, time)
        h = self.add(f"{name}.add_time", LayerSpec(kind="add"), h, t)
        h = self.add(f"{name}.norm2", LayerSpec(kind="layer-norm", channels=out_channels), h)
        h = self.silu(f"{name}.act2", h)
        h = self.conv(f"{name}.conv2", out_channels, out_channels, h)
        skip = source if in_channels == out_channels else self.conv(f"{name}.skip", in_channels, out_channels,
                                                                    source, kernel=1)

        return self.add(f"{name}.residual", LayerSpec(kind="add"), h, skip)


def build_unet_graph(
        latent_dim: int = 16,
        widths: Sequence[int] = DEFAULT_WIDTHS,
        time_dim: int = 64,
        name: str = "denoiser",
) -> Graph:
    """Build the 1D U-Net noise predictor.

    The latent vector is treated as a single-channel signal of length `latent_dim`. Each entry of `widths` adds a
    resolution: the first works at full length, every further one halves the length with a strided convolution.
    The upsampling path mirrors the downsampling path and concatenates the matching skip activation. The time step
    goes through a sinusoidal embedding and a two-layer MLP, then a dense projection per residual block is added to
    the feature map.
    """
    if not widths:
        raise ConfigurationError("U-Net needs at least one resolution")
    factor = 2 ** (len(widths) - 1)
    if latent_dim % factor:
        raise ConfigurationError(f"Latent dimension {latent_dim} is not divisible by {factor} for {len(widths)} "
                                 f"resolutions")

    time_hidden = 4 * time_dim
    b = _GraphBuilder()
    b.add("time.embed", LayerSpec(kind="sinusoidal-time-embedding", dim=time_dim), TIME)
    t = b.dense("time.fc1", time_dim, time_hidden, "time.embed")
    t = b.silu("time.act1", t)
    t = b.dense("time.fc2", time_hidden, time_hidden, t)
    time = b.silu("time.act2", t)

    h = b.add("in.reshape", LayerSpec(kind="reshape", shape=(1, latent_dim)))
    h = b.conv("in.conv", 1, widths[0], h)

    channels = widths[0]
    skips = []
    for level, width in enumerate(widths):
        if level:
            spec = LayerSpec(kind="strided-downsample", in_channels=channels, out_channels=channels, kernel=3)
            h = b.add(f"down{level}.sample", spec, h)
        h = b.residual_block(f"down{level}.block", h, channels, width, time, time_hidden)
        channels = width
        skips.append(h)

    h = b.residual_block("mid.block", h, channels, channels, time, time_hidden)

    for level in reversed(range(len(widths))):
        width = widths[level]
        h = b.add(f"up{level}.concat", LayerSpec(kind="skip-concat"), h, skips[level])
        h = b.residual_block(f"up{level}.block", h, channels + width, width, time, time_hidden)
        channels = width
        if level:
            h = b.add(f"up{level}.sample", LayerSpec(kind="nearest-upsample", factor=2), h)
            h = b.conv(f"up{level}.conv", channels, channels, h)

    h = b.add("out.norm", LayerSpec(kind="layer-norm", channels=channels), h)
    h = b.silu("out.act", h)
    h = b.conv("out.conv", channels, 1, h)
    b.add("out.reshape", LayerSpec(kind="reshape", shape=(latent_dim,)), h)

    return Graph(name, (latent_dim,), b.nodes)


def build_mlp_graph(latent_dim: int, hidden: int = 128, time_dim: int = 64, name: str = "denoiser") -> Graph:
    """Build a small fully connected noise predictor for low-dimensional latents."""
    b = _GraphBuilder()
    b.add("time.embed", LayerSpec(kind="sinusoidal-time-embedding", dim=time_dim), TIME)
    t1 = b.dense("time.fc1", time_dim, hidden, "time.embed")
    t2 = b.dense("time.fc2", time_dim, hidden, "time.embed")

    h = b.dense("in.fc", latent_dim, hidden, INPUT)
    h = b.add("in.add_time", LayerSpec(kind="add"), h, t1)
    h = b.silu("in.act", h)
    h = b.dense("hidden.fc", hidden, hidden, h)
    h = b.add("hidden.add_time", LayerSpec(kind="add"), h, t2)
    h = b.silu("hidden.act", h)
    b.dense("out.fc", hidden, latent_dim, h)

    return Graph(name, (latent_dim,), b.nodes)


@dataclass
class DenoiserModel:
    """Noise predictor ε_θ(x_t, t) for time steps `1..steps`.

    Attributes:
        graph (Graph): The network; takes `(batch, latent_dim)` latents and `(batch,)` time steps.
        params (ParameterSet): The network parameters.
        steps (int): The number of diffusion steps T the model serves.
    """
    graph: Graph
    params: ParameterSet
    steps: int

    @property
    def latent_dim(self) -> int:
        return self.graph.input_shape[0]

    @property
    def param_count(self) -> int:
        return self.params.num_elements()

    def with_params(self, params: ParameterSet) -> "DenoiserModel":
        return DenoiserModel(graph=self.graph, params=params, steps=self.steps)

    def _check_steps(self, t: Tensor):
        if np.any(t < 1) or np.any(t > self.steps):
            raise UsageError(f"Time step out of range 1..{self.steps}: {t.min()}..{t.max()}")

    def forward(self, x_t: Tensor, t: Tensor | int):
        """Batched prediction that keeps the tape for a later `backward`."""
        t = np.broadcast_to(np.asarray(t, dtype=np.int64), (len(x_t),))
        self._check_steps(t)

        return forward(self.params, self.graph, x_t, t)

    def backward(self, tape, grad: Tensor):
        backward(tape, grad)

    def denoise(self, x_t: Tensor, t: Tensor | int) -> Tensor:
        x_t = np.asarray(x_t)
        out, _ = self.forward(np.atleast_2d(x_t), t)

        return out[0] if x_t.ndim == 1 else out


def init_denoiser(
        latent_dim: int,
        steps: int,
        seed: int,
        widths: Sequence[int] = DEFAULT_WIDTHS,
        time_dim: int = 64,
        architecture: Architecture = "unet",
        dtype: type[np.floating] = np.float64,
) -> DenoiserModel:
    """Create a freshly initialized noise predictor."""
    if steps < 1:
        raise ConfigurationError(f"Number of diffusion steps must be positive, got {steps}")

    if architecture == "unet":
        graph = build_unet_graph(latent_dim, widths, time_dim)
    else:
        graph = build_mlp_graph(latent_dim, hidden=max(widths), time_dim=time_dim)

    return DenoiserModel(graph=graph, params=graph.init_params(np.random.default_rng(seed), dtype), steps=steps)


def denoise(model: DenoiserModel, x_t: Tensor, t: int) -> Tensor:
    """Predict the noise contained in `x_t` at step `t`."""
    return model.denoise(x_t, t)
