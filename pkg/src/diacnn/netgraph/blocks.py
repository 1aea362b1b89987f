"""Inception-family building blocks.

Each ``*_block`` style function appends layers to a :class:`GraphBuilder` and
returns the name of its output layer. The ``build_*`` wrappers produce a
standalone fragment :class:`ModelSpec` whose single output role is ``"out"``.
Every convolution unit here is conv (no bias) -> batch norm -> ReLU.
"""

from __future__ import annotations

from typing import Sequence

from diacnn.netgraph.graph import GraphBuilder, ModelSpec


def _positive(widths: Sequence[int], what: str) -> tuple[int, ...]:
    widths = tuple(int(w) for w in widths)
    if not widths or any(w < 1 for w in widths):
        raise ValueError(f"{what} must be positive, got {widths}")
    return widths


def inception_module(
    g: GraphBuilder,
    x: str,
    prefix: str,
    branch_widths: Sequence[int],
    out_channels: int,
    final_relu: bool = True,
) -> str:
    """conv1x1(concat(conv1x1(x), conv3x3(x), conv5x5(x), maxpool3x3(x)))."""
    w1, w3, w5 = _positive(branch_widths, "branch widths")
    b1 = g.conv_bn(f"{prefix}.b1", x, w1, 1)
    b3 = g.conv_bn(f"{prefix}.b3", x, w3, 3)
    b5 = g.conv_bn(f"{prefix}.b5", x, w5, 5)
    bp = g.maxpool(f"{prefix}.pool", x, window=3, stride=1, padding="same")
    cat = g.concat(f"{prefix}.concat", [b1, b3, b5, bp])
    return g.conv_bn(f"{prefix}.proj", cat, out_channels, 1, relu=final_relu)


def residual_inception_block(g: GraphBuilder, x: str, prefix: str, branch_widths: Sequence[int]) -> str:
    """relu(x + F(x)) with F an inception module projecting back to x's channels."""
    c = g.channels(x)
    f = inception_module(g, x, f"{prefix}.inc", branch_widths, c, final_relu=False)
    if g.channels(f) != c:
        raise ValueError(f"{prefix}: skip has {c} channels, branch {g.channels(f)}")
    s = g.add(f"{prefix}.add", x, f)
    return g.relu(f"{prefix}.relu", s)


def stem(g: GraphBuilder, x: str, prefix: str, w1: dict, w2: dict) -> str:
    """maxpool(conv(x, w1)) + maxpool(conv(x, w2)), pools 2x2 stride 2.

    ``w1`` / ``w2`` give ``out_channels`` and ``kernel`` of each branch.
    """
    if int(w1["out_channels"]) != int(w2["out_channels"]):
        raise ValueError(f"{prefix}: stem branches differ in channels ({w1['out_channels']} vs {w2['out_channels']})")
    a = g.conv_bn(f"{prefix}.a", x, w1["out_channels"], w1["kernel"], w1.get("stride", 1))
    b = g.conv_bn(f"{prefix}.b", x, w2["out_channels"], w2["kernel"], w2.get("stride", 1))
    a = g.maxpool(f"{prefix}.a.pool", a, 2, 2)
    b = g.maxpool(f"{prefix}.b.pool", b, 2, 2)
    if g.shape(a) != g.shape(b):
        raise ValueError(f"{prefix}: stem branch shapes differ {g.shape(a)} vs {g.shape(b)}")
    return g.add(f"{prefix}.add", a, b)


def reduction(g: GraphBuilder, x: str, prefix: str, branch_widths: Sequence[int], out_channels: int) -> str:
    """conv1x1(concat(maxpool3x3(x), conv1x1(x), conv3x3(x), conv5x5(x)))."""
    w1, w3, w5 = _positive(branch_widths, "branch widths")
    if int(out_channels) < 1:
        raise ValueError("out_channels must be positive")
    bp = g.maxpool(f"{prefix}.pool", x, window=3, stride=1, padding="same")
    b1 = g.conv_bn(f"{prefix}.b1", x, w1, 1)
    b3 = g.conv_bn(f"{prefix}.b3", x, w3, 3)
    b5 = g.conv_bn(f"{prefix}.b5", x, w5, 5)
    cat = g.concat(f"{prefix}.concat", [bp, b1, b3, b5])
    return g.conv_bn(f"{prefix}.proj", cat, out_channels, 1)


def aux_classifier(g: GraphBuilder, x: str, prefix: str, num_classes: int, conv_channels: int = 16) -> str:
    """fc(avgpool(conv(x))), returning logits."""
    c = g.conv_bn(f"{prefix}.conv", x, conv_channels, 1)
    p = g.gap(f"{prefix}.gap", c)
    return g.fc(f"{prefix}.fc", p, num_classes)


# standalone fragments -------------------------------------------------------


def _fragment(in_channels: int, spatial: Sequence[int]) -> GraphBuilder:
    return GraphBuilder((int(in_channels), int(spatial[0]), int(spatial[1])))


def build_inception_module(in_channels, branch_widths, out_channels, spatial=(8, 8)) -> ModelSpec:
    g = _fragment(in_channels, spatial)
    out = inception_module(g, "input", "inc", branch_widths, out_channels)
    return g.build({"out": out}, preset="inception_module")


def build_residual_inception_block(in_channels, branch_widths, spatial=(8, 8)) -> ModelSpec:
    g = _fragment(in_channels, spatial)
    out = residual_inception_block(g, "input", "rib", branch_widths)
    return g.build({"out": out, "sum": "rib.add"}, preset="residual_inception_block")


def build_stem(in_channels, w1_attrs: dict, w2_attrs: dict, spatial=(8, 8)) -> ModelSpec:
    g = _fragment(in_channels, spatial)
    out = stem(g, "input", "stem", w1_attrs, w2_attrs)
    return g.build({"out": out}, preset="stem")


def build_reduction(in_channels, branch_widths, out_channels, spatial=(8, 8)) -> ModelSpec:
    g = _fragment(in_channels, spatial)
    out = reduction(g, "input", "red", branch_widths, out_channels)
    return g.build({"out": out}, preset="reduction")


def build_aux_classifier(in_channels, num_classes, spatial=(4, 4), conv_channels: int = 16) -> ModelSpec:
    g = _fragment(in_channels, spatial)
    out = aux_classifier(g, "input", "aux", num_classes, conv_channels)
    return g.build({"out": out, "logits": out}, num_classes=num_classes, preset="aux_classifier")
