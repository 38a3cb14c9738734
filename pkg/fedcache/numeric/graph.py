from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from fedcache.common.exceptions import ConfigurationError, NumericError, UsageError

from .layers import Layer, LayerSpec, build_layer
from .params import ParameterSet, Tensor

INPUT = "input"
TIME = "time"


@dataclass(frozen=True)
class Node:
    """One layer of a graph and the names of the values it consumes.

    Attributes:
        name (str): Unique node name; parameters of the node are named `<name>.<suffix>`.
        spec (LayerSpec): The layer description.
        inputs (tuple[str, ...]): Earlier node names, or the reserved sources `input` and `time`.
    """
    name: str
    spec: LayerSpec
    inputs: tuple[str, ...] = (INPUT,)


class Graph:
    """Ordered, validated list of nodes with inferred per-sample shapes.

    Construction checks the wiring and infers every node's output shape, so a graph that builds is guaranteed to
    run on inputs of `input_shape`.
    """

    def __init__(self, name: str, input_shape: Sequence[int], nodes: Sequence[Node], output: str | None = None):
        if not nodes:
            raise ConfigurationError(f"Graph `{name}` has no nodes")

        self.name = name
        self.input_shape = tuple(input_shape)
        self.nodes = tuple(nodes)
        self.output = output or self.nodes[-1].name
        self._layers: dict[str, Layer] = {}
        self._shapes: dict[str, tuple[int, ...]] = {INPUT: self.input_shape, TIME: ()}

        for node in self.nodes:
            if node.name in self._shapes:
                raise ConfigurationError(f"Graph `{name}`: duplicate node name `{node.name}`")

            layer = build_layer(node.spec)
            if len(node.inputs) != layer.arity:
                raise ConfigurationError(
                    f"Graph `{name}`: node `{node.name}` takes {layer.arity} inputs, got {len(node.inputs)}",
                )
            unknown = [source for source in node.inputs if source not in self._shapes]
            if unknown:
                raise ConfigurationError(f"Graph `{name}`: node `{node.name}` reads undefined {unknown}")

            try:
                self._shapes[node.name] = layer.output_shape(*(self._shapes[source] for source in node.inputs))
            except ConfigurationError as exc:
                raise ConfigurationError(f"Graph `{name}`: node `{node.name}`: {exc}") from exc
            self._layers[node.name] = layer

        if self.output not in self._layers:
            raise ConfigurationError(f"Graph `{name}`: unknown output node `{self.output}`")

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self._shapes[self.output]

    @property
    def uses_time(self) -> bool:
        return any(TIME in node.inputs for node in self.nodes)

    def shape_of(self, name: str) -> tuple[int, ...]:
        return self._shapes[name]

    def layer(self, name: str) -> Layer:
        return self._layers[name]

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            f"{node.name}.{suffix}": shape
            for node in self.nodes
            for suffix, shape in self._layers[node.name].parameter_shapes().items()
        }

    def init_params(self, rng: np.random.Generator, dtype: type[np.floating] = np.float64) -> ParameterSet:
        """Create a freshly initialized parameter set in node order.

        Dense and convolution weights are drawn from `Normal(0, 2 / fan_in)`, biases are zero and normalization
        gains are one.
        """
        params = ParameterSet()
        for node in self.nodes:
            for suffix, value in self._layers[node.name].initialize(rng, dtype).items():
                params.add(f"{node.name}.{suffix}", value)

        return params

    def node_params(self, params: ParameterSet, node: Node) -> dict[str, Tensor]:
        return {suffix: params[f"{node.name}.{suffix}"] for suffix in self._layers[node.name].parameter_shapes()}


@dataclass
class Tape:
    """Activation record of one forward pass, consumed by exactly one `backward` call."""
    graph: Graph
    params: ParameterSet
    input_shape: tuple[int, ...]
    caches: dict[str, Any] = field(default_factory=dict)
    consumed: bool = False


def forward(
        params: ParameterSet,
        graph: Graph,
        input: Tensor,
        aux: Tensor | None = None,
) -> tuple[Tensor, Tape]:
    """Run `graph` on a batch.

    Args:
        params (ParameterSet): Parameters of the graph; gradients of the matching `backward` accumulate here.
        graph (Graph): The layer graph.
        input (Tensor): Batched input of shape `(batch, *graph.input_shape)`.
        aux (Tensor | None): Integer time steps of shape `(batch,)`; required iff the graph embeds time.

    Returns:
        The batched output and the tape needed by `backward`.
    """
    input = np.asarray(input)
    if input.shape[1:] != graph.input_shape:
        raise ConfigurationError(
            f"Graph `{graph.name}` expects per-sample shape {graph.input_shape}, got {input.shape[1:]}",
        )
    if graph.uses_time != (aux is not None):
        raise ConfigurationError(
            f"Graph `{graph.name}` {'requires' if graph.uses_time else 'does not take'} a time index",
        )

    dtype = params.dtype
    values: dict[str, Tensor] = {INPUT: input.astype(dtype, copy=False)}
    if aux is not None:
        aux = np.asarray(aux)
        if aux.shape != (input.shape[0],):
            raise ConfigurationError(f"Time index shape {aux.shape} does not match batch size {input.shape[0]}")
        values[TIME] = aux

    tape = Tape(graph=graph, params=params, input_shape=input.shape)
    for node in graph.nodes:
        layer = graph.layer(node.name)
        out, tape.caches[node.name] = layer.forward(
            graph.node_params(params, node),
            *(values[source] for source in node.inputs),
        )
        if not np.all(np.isfinite(out)):
            raise NumericError(f"Non-finite activation in layer `{node.name}` of graph `{graph.name}`")
        values[node.name] = out.astype(dtype, copy=False)

    return values[graph.output], tape


def backward(tape: Tape, output_gradient: Tensor) -> Tensor:
    """Propagate `output_gradient` through a recorded forward pass.

    Parameter gradients accumulate into the tape's `ParameterSet`; call `zero_grad` (or an optimizer step) between
    independent passes.

    Args:
        tape (Tape): The record returned by `forward`.
        output_gradient (Tensor): Gradient of the loss w.r.t. the graph output.

    Returns:
        The gradient w.r.t. the graph input, same shape as the forward input.
    """
    if tape.consumed:
        raise UsageError("Tape has already been consumed by a backward pass")
    tape.consumed = True

    graph = tape.graph
    expected = (tape.input_shape[0],) + graph.output_shape
    if output_gradient.shape != expected:
        raise ConfigurationError(f"Output gradient shape {output_gradient.shape} does not match {expected}")

    grads: dict[str, Tensor] = {graph.output: output_gradient}
    for node in reversed(graph.nodes):
        grad = grads.pop(node.name, None)
        if grad is None:
            continue

        layer = graph.layer(node.name)
        input_grads, param_grads = layer.backward(graph.node_params(tape.params, node), tape.caches.pop(node.name),
                                                  grad)
        for suffix, param_grad in param_grads.items():
            tape.params.parameter(f"{node.name}.{suffix}").grad += param_grad

        for source, input_grad in zip(node.inputs, input_grads):
            if input_grad is None or source == TIME:
                continue
            grads[source] = grads[source] + input_grad if source in grads else input_grad

    return grads.get(INPUT, np.zeros(tape.input_shape, dtype=output_gradient.dtype))
