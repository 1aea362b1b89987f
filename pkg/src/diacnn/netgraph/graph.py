"""Declarative layer graphs with build-time shape inference."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

Shape = tuple[int, ...]

# kinds that own trainable parameters
WEIGHTED_KINDS = ("conv", "bn", "fc")


@dataclass(frozen=True)
class Layer:
    name: str
    kind: str
    inputs: tuple[str, ...]
    attrs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "inputs": list(self.inputs), "attrs": dict(self.attrs)}

    @classmethod
    def from_dict(cls, d: dict) -> "Layer":
        return cls(d["name"], d["kind"], tuple(d["inputs"]), dict(d.get("attrs", {})))


@dataclass
class ModelSpec:
    """An ordered, shape-checked layer graph.

    ``outputs`` maps roles (``logits``, ``features``, ``aux_logits`` or
    ``out`` for fragments) to layer names. The graph input is named
    ``"input"`` and has shape ``input_shape`` (C, H, W).
    """

    input_shape: tuple[int, int, int]
    layers: list[Layer]
    outputs: dict[str, str]
    num_classes: Optional[int] = None
    preset: str = "custom"
    meta: dict = field(default_factory=dict)
    shapes: dict[str, Shape] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.input_shape = tuple(int(v) for v in self.input_shape)
        self.shapes = infer_shapes(self.input_shape, self.layers)
        for role, name in self.outputs.items():
            if name not in self.shapes:
                raise ValueError(f"output {role!r} refers to unknown layer {name!r}")

    def layer(self, name: str) -> Layer:
        for lyr in self.layers:
            if lyr.name == name:
                return lyr
        raise KeyError(name)

    def weighted_layers(self) -> list[Layer]:
        return [lyr for lyr in self.layers if lyr.kind in ("conv", "fc")]

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
            "preset": self.preset,
            "meta": self.meta,
            "outputs": self.outputs,
            "layers": [lyr.to_dict() for lyr in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            input_shape=tuple(d["input_shape"]),
            layers=[Layer.from_dict(x) for x in d["layers"]],
            outputs=dict(d["outputs"]),
            num_classes=d.get("num_classes"),
            preset=d.get("preset", "custom"),
            meta=d.get("meta", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


def _conv_len(size: int, k: int, stride: int, padding: str) -> int:
    pad = k // 2 if padding == "same" else 0
    return (size + 2 * pad - k) // stride + 1


def layer_output_shape(layer: Layer, in_shapes: Sequence[Shape]) -> Shape:
    """Per-sample output shape of ``layer`` (batch dimension excluded)."""
    a = layer.attrs
    kind = layer.kind
    if kind in ("relu", "bn", "softmax") and len(in_shapes) == 1:
        s = in_shapes[0]
        if kind == "bn" and s[0] != a["channels"]:
            raise ValueError(f"{layer.name}: expects {a['channels']} channels, got {s[0]}")
        return s
    if kind == "conv":
        (s,) = in_shapes
        if len(s) != 3 or s[0] != a["in_channels"]:
            raise ValueError(f"{layer.name}: expects {a['in_channels']} input channels, got {s}")
        k, st, pad = a["kernel"], a.get("stride", 1), a.get("padding", "same")
        if pad == "same" and k % 2 == 0:
            raise ValueError(f"{layer.name}: 'same' padding needs an odd kernel")
        h, w = _conv_len(s[1], k, st, pad), _conv_len(s[2], k, st, pad)
        if h < 1 or w < 1:
            raise ValueError(f"{layer.name}: zero-sized spatial output")
        return (a["out_channels"], h, w)
    if kind == "maxpool":
        (s,) = in_shapes
        k, st, pad = a["window"], a.get("stride", a["window"]), a.get("padding", "valid")
        if pad == "valid" and (k > s[1] or k > s[2]):
            raise ValueError(f"{layer.name}: window {k} larger than {s[1]}x{s[2]}")
        return (s[0], _conv_len(s[1], k, st, pad), _conv_len(s[2], k, st, pad))
    if kind == "gap":
        (s,) = in_shapes
        return (s[0],)
    if kind == "flatten":
        (s,) = in_shapes
        n = 1
        for v in s:
            n *= v
        return (n,)
    if kind == "fc":
        (s,) = in_shapes
        if len(s) != 1 or s[0] != a["in_features"]:
            raise ValueError(f"{layer.name}: expects {a['in_features']} features, got {s}")
        return (a["out_features"],)
    if kind == "add":
        if len(in_shapes) != 2 or in_shapes[0] != in_shapes[1]:
            raise ValueError(f"{layer.name}: add of mismatched shapes {list(in_shapes)}")
        return in_shapes[0]
    if kind == "concat":
        first = in_shapes[0]
        for s in in_shapes:
            if len(s) != 3 or s[1:] != first[1:]:
                raise ValueError(f"{layer.name}: concat spatial mismatch {list(in_shapes)}")
        return (sum(s[0] for s in in_shapes),) + tuple(first[1:])
    raise ValueError(f"{layer.name}: unknown layer kind {kind!r}")


def infer_shapes(input_shape: Shape, layers: Sequence[Layer]) -> dict[str, Shape]:
    shapes: dict[str, Shape] = {"input": tuple(input_shape)}
    for lyr in layers:
        if lyr.name in shapes:
            raise ValueError(f"duplicate layer name {lyr.name!r}")
        for src in lyr.inputs:
            if src not in shapes:
                raise ValueError(f"{lyr.name}: unknown input {src!r}")
        shapes[lyr.name] = layer_output_shape(lyr, [shapes[s] for s in lyr.inputs])
    return shapes


class GraphBuilder:
    """Appends layers while tracking output shapes; methods return the new layer name."""

    def __init__(self, input_shape: Sequence[int]):
        self.input_shape = tuple(int(v) for v in input_shape)
        self.layers: list[Layer] = []
        self.shapes: dict[str, Shape] = {"input": self.input_shape}

    def shape(self, name: str) -> Shape:
        return self.shapes[name]

    def channels(self, name: str) -> int:
        return self.shapes[name][0]

    def add_layer(self, name: str, kind: str, inputs: Sequence[str], **attrs: Any) -> str:
        if name in self.shapes:
            raise ValueError(f"duplicate layer name {name!r}")
        lyr = Layer(name, kind, tuple(inputs), attrs)
        for src in lyr.inputs:
            if src not in self.shapes:
                raise ValueError(f"{name}: unknown input {src!r}")
        self.shapes[name] = layer_output_shape(lyr, [self.shapes[s] for s in lyr.inputs])
        self.layers.append(lyr)
        return name

    def conv(self, name, x, out_channels, kernel, stride=1, padding="same", bias=True, **extra):
        return self.add_layer(
            name, "conv", [x], in_channels=self.channels(x), out_channels=int(out_channels),
            kernel=int(kernel), stride=int(stride), padding=padding, bias=bool(bias), **extra,
        )

    def bn(self, name, x):
        return self.add_layer(name, "bn", [x], channels=self.channels(x))

    def relu(self, name, x):
        return self.add_layer(name, "relu", [x])

    def maxpool(self, name, x, window=2, stride=2, padding="valid"):
        return self.add_layer(name, "maxpool", [x], window=int(window), stride=int(stride), padding=padding)

    def gap(self, name, x):
        return self.add_layer(name, "gap", [x])

    def flatten(self, name, x):
        return self.add_layer(name, "flatten", [x])

    def fc(self, name, x, out_features):
        return self.add_layer(name, "fc", [x], in_features=self.shapes[x][0], out_features=int(out_features))

    def add(self, name, a, b):
        return self.add_layer(name, "add", [a, b])

    def concat(self, name, parts):
        return self.add_layer(name, "concat", list(parts))

    def conv_bn(self, prefix, x, out_channels, kernel, stride=1, relu=True, **extra):
        """conv (no bias) -> batch norm -> optional ReLU, named ``prefix.conv`` etc."""
        y = self.conv(f"{prefix}.conv", x, out_channels, kernel, stride, bias=False, **extra)
        y = self.bn(f"{prefix}.bn", y)
        return self.relu(f"{prefix}.relu", y) if relu else y

    def build(self, outputs: dict[str, str], num_classes=None, preset="custom", meta=None) -> ModelSpec:
        return ModelSpec(self.input_shape, list(self.layers), dict(outputs), num_classes, preset, dict(meta or {}))
