from collections.abc import Callable

import numpy as np
import pytest

from fedcache.models import build_mlp_graph, build_unet_graph
from fedcache.numeric import INPUT, TIME, Graph, LayerSpec, Node, backward, forward

EPS = 1e-6
COORDINATES = 100


def dense_graph() -> Graph:
    return Graph("dense", (5,), [Node("fc", LayerSpec(kind="dense", fan_in=5, fan_out=4))])


def conv_graph() -> Graph:
    return Graph("conv", (3, 7), [
        Node("conv", LayerSpec(kind="conv1d", in_channels=3, out_channels=4, kernel=3)),
    ])


def wide_kernel_graph() -> Graph:
    return Graph("wide", (2, 6), [
        Node("conv", LayerSpec(kind="conv1d", in_channels=2, out_channels=2, kernel=5)),
    ])


def downsample_graph() -> Graph:
    return Graph("down", (3, 7), [
        Node("down", LayerSpec(kind="strided-downsample", in_channels=3, out_channels=4, kernel=3)),
    ])


def layer_norm_vector_graph() -> Graph:
    return Graph("norm", (6,), [Node("norm", LayerSpec(kind="layer-norm", channels=6))])


def layer_norm_signal_graph() -> Graph:
    return Graph("norm", (4, 5), [Node("norm", LayerSpec(kind="layer-norm", channels=4))])


def activation_graph(kind: str) -> Callable[[], Graph]:
    def build() -> Graph:
        return Graph(kind, (6,), [
            Node("fc", LayerSpec(kind="dense", fan_in=6, fan_out=6)),
            Node("act", LayerSpec(kind=kind), ("fc",)),
        ])
    return build


def upsample_graph() -> Graph:
    return Graph("up", (3, 4), [
        Node("up", LayerSpec(kind="nearest-upsample", factor=2)),
        Node("conv", LayerSpec(kind="conv1d", in_channels=3, out_channels=2, kernel=3), ("up",)),
    ])


def concat_graph() -> Graph:
    return Graph("concat", (2, 5), [
        Node("left", LayerSpec(kind="conv1d", in_channels=2, out_channels=3, kernel=3)),
        Node("right", LayerSpec(kind="conv1d", in_channels=2, out_channels=2, kernel=1)),
        Node("cat", LayerSpec(kind="skip-concat"), ("left", "right")),
    ])


def add_time_graph() -> Graph:
    return Graph("add", (3, 5), [
        Node("embed", LayerSpec(kind="sinusoidal-time-embedding", dim=8), (TIME,)),
        Node("project", LayerSpec(kind="dense", fan_in=8, fan_out=4), ("embed",)),
        Node("conv", LayerSpec(kind="conv1d", in_channels=3, out_channels=4, kernel=3), (INPUT,)),
        Node("sum", LayerSpec(kind="add"), ("conv", "project")),
    ])


def reshape_graph() -> Graph:
    return Graph("reshape", (6,), [
        Node("reshape", LayerSpec(kind="reshape", shape=(2, 3))),
        Node("conv", LayerSpec(kind="conv1d", in_channels=2, out_channels=2, kernel=3), ("reshape",)),
    ])


def small_unet_graph() -> Graph:
    return build_unet_graph(latent_dim=8, widths=(4, 8), time_dim=8)


def small_mlp_graph() -> Graph:
    return build_mlp_graph(latent_dim=3, hidden=6, time_dim=4)


def numeric_derivative(evaluate: Callable[[], float], array: np.ndarray, index: tuple) -> float:
    original = array[index]
    array[index] = original + EPS
    upper = evaluate()
    array[index] = original - EPS
    lower = evaluate()
    array[index] = original

    return (upper - lower) / (2 * EPS)


@pytest.mark.parametrize("build_graph", (
    dense_graph,
    conv_graph,
    wide_kernel_graph,
    downsample_graph,
    layer_norm_vector_graph,
    layer_norm_signal_graph,
    activation_graph("relu"),
    activation_graph("silu"),
    activation_graph("sigmoid"),
    upsample_graph,
    concat_graph,
    add_time_graph,
    reshape_graph,
    small_unet_graph,
    small_mlp_graph,
))
def test_analytic_gradients_match_finite_differences(build_graph: Callable[[], Graph], rng: np.random.Generator):
    graph = build_graph()
    params = graph.init_params(rng)
    for parameter in params:
        parameter.value += rng.normal(0.0, 0.1, size=parameter.value.shape)

    x = rng.standard_normal((3,) + graph.input_shape)
    steps = rng.integers(1, 50, size=3) if graph.uses_time else None
    output, tape = forward(params, graph, x, steps)
    projection = rng.standard_normal(output.shape)
    input_grad = backward(tape, projection)

    def evaluate() -> float:
        value, _ = forward(params, graph, x, steps)
        return float(np.sum(value * projection))

    arrays = [(x, input_grad)] + [(parameter.value, parameter.grad) for parameter in params]
    candidates = [(position, index) for position, (array, _) in enumerate(arrays) for index in np.ndindex(array.shape)]
    chosen = rng.choice(len(candidates), size=min(COORDINATES, len(candidates)), replace=False)

    analytic, numeric = [], []
    for choice in chosen:
        position, index = candidates[choice]
        array, grad = arrays[position]
        analytic.append(grad[index])
        numeric.append(numeric_derivative(evaluate, array, index))

    np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-7)


def test_gradients_accumulate_across_passes(rng: np.random.Generator):
    graph = dense_graph()
    params = graph.init_params(rng)
    x = rng.standard_normal((2, 5))
    projection = rng.standard_normal((2, 4))

    _, tape = forward(params, graph, x)
    backward(tape, projection)
    once = params.parameter("fc.weight").grad.copy()
    _, tape = forward(params, graph, x)
    backward(tape, projection)

    np.testing.assert_allclose(params.parameter("fc.weight").grad, 2 * once)
