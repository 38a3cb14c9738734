import numpy as np
import pytest
from pydantic import ValidationError

from fedcache.common.exceptions import ConfigurationError, NumericError, UsageError
from fedcache.numeric import TIME, Graph, LayerSpec, Node, backward, forward


def test_graph_infers_output_shape():
    graph = Graph("g", (2, 8), [
        Node("down", LayerSpec(kind="strided-downsample", in_channels=2, out_channels=4, kernel=3)),
        Node("up", LayerSpec(kind="nearest-upsample", factor=2), ("down",)),
    ])

    assert graph.shape_of("down") == (4, 4)
    assert graph.output_shape == (4, 8)


def test_graph_rejects_undefined_inputs():
    with pytest.raises(ConfigurationError):
        Graph("g", (4,), [Node("fc", LayerSpec(kind="dense", fan_in=4, fan_out=2), ("missing",))])


def test_graph_rejects_incompatible_shapes():
    with pytest.raises(ConfigurationError):
        Graph("g", (4,), [Node("fc", LayerSpec(kind="dense", fan_in=3, fan_out=2))])


@pytest.mark.parametrize("fields", (
    {"kind": "dense", "fan_in": 3},
    {"kind": "conv1d", "in_channels": 1, "out_channels": 1, "kernel": 2},
    {"kind": "sinusoidal-time-embedding", "dim": 3},
    {"kind": "layer-norm", "channels": 0},
))
def test_layer_spec_validation(fields: dict):
    with pytest.raises(ValidationError):
        LayerSpec(**fields)


def test_init_params_draws_he_normal_weights():
    graph = Graph("g", (400,), [Node("fc", LayerSpec(kind="dense", fan_in=400, fan_out=300))])
    params = graph.init_params(np.random.default_rng(0))

    assert params["fc.weight"].shape == (300, 400)
    assert params["fc.weight"].std() == pytest.approx(np.sqrt(2.0 / 400), rel=0.02)
    assert not params["fc.bias"].any()


def test_forward_checks_input_shape():
    graph = Graph("g", (3,), [Node("fc", LayerSpec(kind="dense", fan_in=3, fan_out=1))])
    params = graph.init_params(np.random.default_rng(0))

    with pytest.raises(ConfigurationError):
        forward(params, graph, np.zeros((2, 4)))


def test_forward_requires_time_for_time_graphs():
    graph = Graph("g", (), [Node("embed", LayerSpec(kind="sinusoidal-time-embedding", dim=4), (TIME,))])
    params = graph.init_params(np.random.default_rng(0))

    with pytest.raises(ConfigurationError):
        forward(params, graph, np.zeros((2,)))


def test_forward_reports_non_finite_layer():
    graph = Graph("g", (2,), [Node("fc", LayerSpec(kind="dense", fan_in=2, fan_out=2))])
    params = graph.init_params(np.random.default_rng(0))

    with pytest.raises(NumericError, match="fc"):
        forward(params, graph, np.array([[np.inf, 0.0]]))


def test_tape_is_consumed_once():
    graph = Graph("g", (2,), [Node("fc", LayerSpec(kind="dense", fan_in=2, fan_out=2))])
    params = graph.init_params(np.random.default_rng(0))
    _, tape = forward(params, graph, np.ones((1, 2)))
    backward(tape, np.ones((1, 2)))

    with pytest.raises(UsageError):
        backward(tape, np.ones((1, 2)))


def test_forward_follows_parameter_precision():
    graph = Graph("g", (2,), [Node("fc", LayerSpec(kind="dense", fan_in=2, fan_out=2))])
    params = graph.init_params(np.random.default_rng(0), dtype=np.float32)
    output, _ = forward(params, graph, np.ones((1, 2)))

    assert output.dtype == np.float32
