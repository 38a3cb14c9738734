"""Layer kinds of the numeric engine.

Every layer works on batched arrays: the leading axis is the batch, the remaining axes are the per-sample shape.
Convolutional layers use the `(channels, length)` per-sample layout. A `LayerSpec` fully determines the output
shape from the input shapes; the matching `Layer` implementation computes values and exact gradients.
"""
import abc
import math
from typing import Any, Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, model_validator

from fedcache.common.exceptions import ConfigurationError

from .params import Tensor

LayerKind = Literal[
    "dense",
    "conv1d",
    "layer-norm",
    "silu",
    "relu",
    "sigmoid",
    "nearest-upsample",
    "strided-downsample",
    "sinusoidal-time-embedding",
    "skip-concat",
    "add",
    "reshape",
]

LAYER_NORM_EPS = 1e-5

_REQUIRED: dict[str, tuple[str, ...]] = {
    "dense": ("fan_in", "fan_out"),
    "conv1d": ("in_channels", "out_channels", "kernel"),
    "strided-downsample": ("in_channels", "out_channels", "kernel"),
    "layer-norm": ("channels",),
    "nearest-upsample": ("factor",),
    "sinusoidal-time-embedding": ("dim",),
    "reshape": ("shape",),
}


class LayerSpec(BaseModel):
    """Declarative description of one layer.

    Attributes:
        kind (LayerKind): The layer kind.
        fan_in (int | None): Dense input width.
        fan_out (int | None): Dense output width.
        in_channels (int | None): Convolution input channels.
        out_channels (int | None): Convolution output channels.
        kernel (int | None): Convolution kernel width, odd.
        stride (int): Convolution stride; `strided-downsample` defaults to 2.
        channels (int | None): Normalized channel count of `layer-norm`.
        factor (int | None): Repeat factor of `nearest-upsample`.
        dim (int | None): Embedding width of `sinusoidal-time-embedding`, even.
        shape (tuple[int, ...] | None): Per-sample target shape of `reshape`.
    """
    model_config = ConfigDict(frozen=True)

    kind: LayerKind
    fan_in: int | None = None
    fan_out: int | None = None
    in_channels: int | None = None
    out_channels: int | None = None
    kernel: int | None = None
    stride: int | None = None
    channels: int | None = None
    factor: int | None = None
    dim: int | None = None
    shape: tuple[int, ...] | None = None

    @model_validator(mode="after")
    def check_hyperparameters(self) -> "LayerSpec":
        missing = [field for field in _REQUIRED.get(self.kind, ()) if getattr(self, field) is None]
        if missing:
            raise ValueError(f"{self.kind} layer requires {', '.join(missing)}")

        for field in ("fan_in", "fan_out", "in_channels", "out_channels", "kernel", "stride", "channels", "factor",
                      "dim"):
            value = getattr(self, field)
            if value is not None and value < 1:
                raise ValueError(f"{field} must be positive, got {value}")

        if self.kernel is not None and self.kernel % 2 == 0:
            raise ValueError(f"kernel width must be odd, got {self.kernel}")
        if self.dim is not None and self.dim % 2:
            raise ValueError(f"time embedding dimension must be even, got {self.dim}")
        if self.shape is not None and any(size < 1 for size in self.shape):
            raise ValueError(f"reshape target must be positive, got {self.shape}")

        return self

    def hyperparameters(self) -> dict[str, Any]:
        """Non-empty hyperparameters, in declaration order."""
        return {key: value for key, value in self.model_dump(exclude={"kind"}).items() if value is not None}


class Layer(abc.ABC):
    """Executable counterpart of a `LayerSpec`.

    Parameters are passed to `forward` and `backward` as a mapping from suffix (`weight`, `bias`, `gain`) to array.
    """
    arity: int = 1

    def __init__(self, spec: LayerSpec):
        self.spec = spec

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        return {}

    def initialize(self, rng: np.random.Generator, dtype: type[np.floating]) -> dict[str, Tensor]:
        return {suffix: np.zeros(shape, dtype=dtype) for suffix, shape in self.parameter_shapes().items()}

    @abc.abstractmethod
    def output_shape(self, *input_shapes: tuple[int, ...]) -> tuple[int, ...]:
        """Per-sample output shape, raising `ConfigurationError` on incompatible inputs."""

    @abc.abstractmethod
    def forward(self, params: dict[str, Tensor], *inputs: Tensor) -> tuple[Tensor, Any]:
        """Return the output and the cache needed by `backward`."""

    @abc.abstractmethod
    def backward(
            self,
            params: dict[str, Tensor],
            cache: Any,
            grad: Tensor,
    ) -> tuple[list[Tensor | None], dict[str, Tensor]]:
        """Return the gradients w.r.t. every input (None when not differentiable) and w.r.t. every parameter."""

    def _expect(self, condition: bool, message: str):
        if not condition:
            raise ConfigurationError(f"{self.spec.kind}: {message}")


class Dense(Layer):
    """Affine map over the last axis, `y = x @ W.T + b` with `W` of shape `(fan_out, fan_in)`."""

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            "weight": (self.spec.fan_out, self.spec.fan_in),
            "bias": (self.spec.fan_out,),
        }

    def initialize(self, rng: np.random.Generator, dtype: type[np.floating]) -> dict[str, Tensor]:
        params = super().initialize(rng, dtype)
        scale = math.sqrt(2.0 / self.spec.fan_in)
        params["weight"] = rng.normal(0.0, scale, size=params["weight"].shape).astype(dtype)

        return params

    def output_shape(self, *input_shapes: tuple[int, ...]) -> tuple[int, ...]:
        (shape,) = input_shapes
        self._expect(len(shape) >= 1 and shape[-1] == self.spec.fan_in,
                     f"expected trailing size {self.spec.fan_in}, got shape {shape}")

        return shape[:-1] + (self.spec.fan_out,)

    def forward(self, params, *inputs):
        (x,) = inputs
        return x @ params["weight"].T + params["bias"], x

    def backward(self, params, cache, grad):
        x = cache
        flat_x = x.reshape(-1, self.spec.fan_in)
        flat_grad = grad.reshape(-1, self.spec.fan_out)

        return [grad @ params["weight"]], {
            "weight": flat_grad.T @ flat_x,
            "bias": flat_grad.sum(axis=0),
        }


class Conv1d(Layer):
    """One-dimensional convolution with symmetric zero padding.

    With stride 1 the output length equals the input length; with stride `s` it is `ceil(length / s)`.
    """
    default_stride = 1

    @property
    def stride(self) -> int:
        return self.spec.stride or self.default_stride

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            "weight": (self.spec.out_channels, self.spec.in_channels, self.spec.kernel),
            "bias": (self.spec.out_channels,),
        }

    def initialize(self, rng: np.random.Generator, dtype: type[np.floating]) -> dict[str, Tensor]:
        params = super().initialize(rng, dtype)
        scale = math.sqrt(2.0 / (self.spec.in_channels * self.spec.kernel))
        params["weight"] = rng.normal(0.0, scale, size=params["weight"].shape).astype(dtype)

        return params

    def output_shape(self, *input_shapes: tuple[int, ...]) -> tuple[int, ...]:
        (shape,) = input_shapes
        self._expect(len(shape) == 2 and shape[0] == self.spec.in_channels,
                     f"expected ({self.spec.in_channels}, length), got {shape}")

        return self.spec.out_channels, (shape[1] - 1) // self.stride + 1

    def forward(self, params, *inputs):
        (x,) = inputs
        pad = self.spec.kernel // 2
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
        # (batch, in_channels, length, kernel), then keep every stride-th window
        windows = sliding_window_view(padded, self.spec.kernel, axis=2)[:, :, ::self.stride, :]
        out = np.tensordot(windows, params["weight"], axes=([1, 3], [1, 2])).transpose(0, 2, 1)

        return out + params["bias"][:, None], (x.shape, windows)

    def backward(self, params, cache, grad):
        input_shape, windows = cache
        kernel = self.spec.kernel
        pad = kernel // 2
        out_length = grad.shape[2]

        grad_weight = np.tensordot(grad, windows, axes=([0, 2], [0, 2]))
        grad_windows = np.tensordot(grad, params["weight"], axes=([1], [0])).transpose(0, 2, 1, 3)

        grad_padded = np.zeros(input_shape[:2] + (input_shape[2] + 2 * pad,), dtype=grad.dtype)
        for offset in range(kernel):
            grad_padded[:, :, offset:offset + self.stride * out_length:self.stride] += grad_windows[..., offset]

        return [grad_padded[:, :, pad:pad + input_shape[2]]], {
            "weight": grad_weight,
            "bias": grad.sum(axis=(0, 2)),
        }


class StridedDownsample(Conv1d):
    """Learned downsampling: a `Conv1d` with stride 2 unless `stride` is given."""
    default_stride = 2


class LayerNorm(Layer):
    """Per-sample normalization over the channel axis with a learned gain and bias per channel.

    The channel axis is the last axis of `(channels,)` inputs and the first per-sample axis of `(channels, length)`
    inputs.
    """

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            "gain": (self.spec.channels,),
            "bias": (self.spec.channels,),
        }

    def initialize(self, rng: np.random.Generator, dtype: type[np.floating]) -> dict[str, Tensor]:
        params = super().initialize(rng, dtype)
        params["gain"] = np.ones(self.spec.channels, dtype=dtype)

        return params

    def output_shape(self, *input_shapes: tuple[int, ...]) -> tuple[int, ...]:
        (shape,) = input_shapes
        self._expect(len(shape) in (1, 2) and shape[0] == self.spec.channels,
                     f"expected {self.spec.channels} channels, got shape {shape}")

        return shape

    @staticmethod
    def _broadcast(vector: Tensor, ndim: int) -> Tensor:
        return vector if ndim == 2 else vector[:, None]

    def forward(self, params, *inputs):
        (x,) = inputs
        mean = x.mean(axis=1, keepdims=True)
        inv_std = 1.0 / np.sqrt(x.var(axis=1, keepdims=True) + LAYER_NORM_EPS)
        normalized = (x - mean) * inv_std
        out = normalized * self._broadcast(params["gain"], x.ndim) + self._broadcast(params["bias"], x.ndim)

        return out, (normalized, inv_std)

    def backward(self, params, cache, grad):
        normalized, inv_std = cache
        reduce_axes = (0,) if grad.ndim == 2 else (0, 2)
        channels = self.spec.channels

        grad_normalized = grad * self._broadcast(params["gain"], grad.ndim)
        grad_input = inv_std / channels * (
            channels * grad_normalized
            - grad_normalized.sum(axis=1, keepdims=True)
            - normalized * (grad_normalized * normalized).sum(axis=1, keepdims=True)
        )

        return [grad_input], {
            "gain": (grad * normalized).sum(axis=reduce_axes),
            "bias": grad.sum(axis=reduce_axes),
        }


class Elementwise(Layer):

    def output_shape(self, *input_shapes: tuple[int, ...]) -> tuple[int, ...]:
        (shape,) = input_shapes
        return shape


def _sigmoid(x: Tensor) -> Tensor:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class ReLU(Elementwise):

    def forward(self, params, *inputs):
        (x,) = inputs
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, params, cache, grad):
        return [np.where(cache, grad, 0.0)], {}


class SiLU(Elementwise):

    def forward(self, params, *inputs):
        (x,) = inputs
        gate = _sigmoid(x)
        return x * gate, (x, gate)

    def backward(self, params, cache, grad):
        x, gate = cache
        return [grad * gate * (1.0 + x * (1.0 - gate))], {}


class Sigmoid(Elementwise):

    def forward(self, params, *inputs):
        (x,) = inputs
        out = _sigmoid(x)
        return out, out

    def backward(self, params, cache, grad):
        return [grad * cache * (1.0 - cache)], {}


class NearestUpsample(Layer):
    """Repeat every position of the last axis `factor` times."""

    def output_shape(self, *input_shapes: tuple[int, ...]) -> tuple[int, ...]:
        (shape,) = input_shapes
        self._expect(len(shape) >= 1, "expected at least one axis")

        return shape[:-1] + (shape[-1] * self.spec.factor,)

    def forward(self, params, *inputs):
        (x,) = inputs
        return np.repeat(x, self.spec.factor, axis=-1), None

    def backward(self, params, cache, grad):
        folded = grad.reshape(grad.shape[:-1] + (grad.shape[-1] // self.spec.factor, self.spec.factor))
        return [folded.sum(axis=-1)], {}


class SinusoidalTimeEmbedding(Layer):
    """Map integer time steps of shape `(batch,)` to `(batch, dim)` sine / cosine features."""

    def output_shape(self, *input_shapes: tuple[int, ...]) -> tuple[int, ...]:
        (shape,) = input_shapes
        self._expect(shape == (), f"expected scalar time steps, got per-sample shape {shape}")

        return (self.spec.dim,)

    def frequencies(self) -> Tensor:
        half = self.spec.dim // 2
        return np.exp(-math.log(10000.0) * np.arange(half) / max(half - 1, 1))

    def forward(self, params, *inputs):
        (steps,) = inputs
        angles = np.asarray(steps, dtype=np.float64)[:, None] * self.frequencies()[None, :]
        return np.concatenate([np.sin(angles), np.cos(angles)], axis=1), None

    def backward(self, params, cache, grad):
        return [None], {}


class SkipConcat(Layer):
    """Concatenate two `(channels, length)` inputs along the channel axis."""
    arity = 2

    def output_shape(self, *input_shapes: tuple[int, ...]) -> tuple[int, ...]:
        first, second = input_shapes
        self._expect(len(first) == len(second) == 2 and first[1] == second[1],
                     f"cannot concatenate {first} and {second}")

        return first[0] + second[0], first[1]

    def forward(self, params, *inputs):
        first, second = inputs
        return np.concatenate([first, second], axis=1), first.shape[1]

    def backward(self, params, cache, grad):
        return [grad[:, :cache], grad[:, cache:]], {}


class Add(Layer):
    """Elementwise sum; a lower-rank second operand is broadcast over the trailing axes of the first."""
    arity = 2

    def output_shape(self, *input_shapes: tuple[int, ...]) -> tuple[int, ...]:
        first, second = input_shapes
        self._expect(first[:len(second)] == second, f"cannot broadcast {second} onto {first}")

        return first

    def forward(self, params, *inputs):
        first, second = inputs
        extra = first.ndim - second.ndim
        return first + second.reshape(second.shape + (1,) * extra), extra

    def backward(self, params, cache, grad):
        extra = cache
        reduced = grad.sum(axis=tuple(range(grad.ndim - extra, grad.ndim))) if extra else grad

        return [grad, reduced], {}


class Reshape(Layer):

    def output_shape(self, *input_shapes: tuple[int, ...]) -> tuple[int, ...]:
        (shape,) = input_shapes
        self._expect(math.prod(shape) == math.prod(self.spec.shape), f"cannot reshape {shape} to {self.spec.shape}")

        return self.spec.shape

    def forward(self, params, *inputs):
        (x,) = inputs
        return x.reshape((x.shape[0],) + self.spec.shape), x.shape

    def backward(self, params, cache, grad):
        return [grad.reshape(cache)], {}


LAYERS: dict[str, type[Layer]] = {
    "dense": Dense,
    "conv1d": Conv1d,
    "layer-norm": LayerNorm,
    "silu": SiLU,
    "relu": ReLU,
    "sigmoid": Sigmoid,
    "nearest-upsample": NearestUpsample,
    "strided-downsample": StridedDownsample,
    "sinusoidal-time-embedding": SinusoidalTimeEmbedding,
    "skip-concat": SkipConcat,
    "add": Add,
    "reshape": Reshape,
}


def build_layer(spec: LayerSpec) -> Layer:
    return LAYERS[spec.kind](spec)
