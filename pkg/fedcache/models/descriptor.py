"""Plain-text architecture descriptors.

A descriptor lists `meta` lines, then for every graph a `graph` header followed by one `node` line per layer:

    meta kind=denoiser steps=50
    graph denoiser input=16 output=out.reshape
    node in.reshape reshape inputs=input shape=1x16
    node in.conv conv1d inputs=in.reshape in_channels=1 out_channels=32 kernel=3
"""
from collections.abc import Mapping, Sequence

from pydantic import ValidationError

from fedcache.common.exceptions import ConfigurationError, DataFormatError
from fedcache.numeric import Graph, LayerSpec, Node

HEADER = "# fedcache architecture v1"


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return "x".join(str(item) for item in value)
    return str(value)


def _parse_dims(text: str) -> tuple[int, ...]:
    return tuple(int(item) for item in text.split("x"))


def render_graphs(graphs: Sequence[Graph], meta: Mapping[str, object] | None = None) -> str:
    lines = [HEADER]
    if meta:
        lines.append("meta " + " ".join(f"{key}={_format_value(value)}" for key, value in meta.items()))

    for graph in graphs:
        lines.append(f"graph {graph.name} input={_format_value(graph.input_shape)} output={graph.output}")
        for node in graph.nodes:
            fields = [f"inputs={','.join(node.inputs)}"]
            fields += [f"{key}={_format_value(value)}" for key, value in node.spec.hyperparameters().items()]
            lines.append(f"node {node.name} {node.spec.kind} {' '.join(fields)}")

    return "\n".join(lines) + "\n"


def _key_values(tokens: list[str], number: int) -> dict[str, str]:
    pairs = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep:
            raise DataFormatError(f"Architecture line {number}: expected key=value, got `{token}`")
        pairs[key] = value
    return pairs


def parse_graphs(text: str) -> tuple[dict[str, Graph], dict[str, str]]:
    """Parse a descriptor into graphs keyed by name, and its meta fields."""
    meta: dict[str, str] = {}
    headers: list[tuple[str, dict[str, str]]] = []
    nodes: dict[str, list[Node]] = {}

    for number, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("#"):
            continue

        match tokens[0]:
            case "meta":
                meta.update(_key_values(tokens[1:], number))
            case "graph" if len(tokens) >= 2:
                headers.append((tokens[1], _key_values(tokens[2:], number)))
                nodes[tokens[1]] = []
            case "node" if len(tokens) >= 3 and headers:
                fields = _key_values(tokens[3:], number)
                if "inputs" not in fields:
                    raise DataFormatError(f"Architecture line {number}: node without inputs")
                inputs = tuple(fields.pop("inputs").split(","))
                if "shape" in fields:
                    fields["shape"] = _parse_dims(fields["shape"])
                try:
                    spec = LayerSpec(kind=tokens[2], **fields)
                except ValidationError as exc:
                    raise DataFormatError(f"Architecture line {number}: invalid layer: {exc}") from exc
                nodes[headers[-1][0]].append(Node(tokens[1], spec, inputs))
            case _:
                raise DataFormatError(f"Architecture line {number}: cannot parse `{line.strip()}`")

    graphs = {}
    for name, fields in headers:
        try:
            graphs[name] = Graph(name, _parse_dims(fields["input"]), nodes[name], output=fields.get("output"))
        except (ConfigurationError, KeyError, ValueError) as exc:
            raise DataFormatError(f"Architecture graph `{name}` is invalid: {exc}") from exc

    return graphs, meta
