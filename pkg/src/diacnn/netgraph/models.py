"""Whole-network presets."""

from __future__ import annotations

from diacnn.netgraph import blocks
from diacnn.netgraph.graph import GraphBuilder, ModelSpec

PRESETS = ("diacnn", "baseline_cnn", "mini_inception")


def build_diacnn(net_width: int = 16, num_classes: int = 2, input_shape=(3, 32, 32)) -> ModelSpec:
    """ResNet-20 style classifier whose stage widths are ``net_width * (1, 2, 4)``.

    Stem conv3x3 -> BN -> ReLU, then three stages of three basic residual
    blocks (conv-BN-ReLU-conv-BN, add, ReLU). The first block of stages 2 and
    3 downsamples with stride 2 and uses a 1x1 conv + BN projection shortcut.
    Global average pooling feeds a single fully connected layer.
    """
    if int(net_width) < 1:
        raise ValueError(f"net_width must be >= 1, got {net_width}")
    if int(num_classes) < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    g = GraphBuilder(input_shape)
    x = g.conv("conv1", "input", net_width, 3, bias=False)
    x = g.bn("bn1", x)
    x = g.relu("relu1", x)
    blocks_seen = []
    for stage, mult in enumerate((1, 2, 4), start=1):
        width = net_width * mult
        for blk in range(1, 4):
            p = f"s{stage}b{blk}"
            stride = 2 if (stage > 1 and blk == 1) else 1
            y = g.conv(f"{p}.conv1", x, width, 3, stride, bias=False)
            y = g.bn(f"{p}.bn1", y)
            y = g.relu(f"{p}.relu1", y)
            y = g.conv(f"{p}.conv2", y, width, 3, bias=False)
            y = g.bn(f"{p}.bn2", y)
            if stride != 1 or g.channels(x) != width:
                sc = g.conv(f"{p}.proj", x, width, 1, stride, bias=False, shortcut=True)
                sc = g.bn(f"{p}.proj_bn", sc)
            else:
                sc = x
            y = g.add(f"{p}.add", sc, y)
            x = g.relu(f"{p}.relu2", y)
            blocks_seen.append(p)
    feat = g.gap("gap", x)
    logits = g.fc("fc", feat, num_classes)
    return g.build(
        {"logits": logits, "features": feat},
        num_classes=num_classes,
        preset="diacnn",
        meta={"net_width": int(net_width), "head": ["fc"], "last_block": blocks_seen[-1]},
    )


def build_baseline_cnn(num_classes: int = 2, input_shape=(3, 224, 224), fc_widths=(256, 128, 64)) -> ModelSpec:
    """Five conv-BN-ReLU-maxpool stages (8..128 filters) and four FC layers."""
    c, h, w = input_shape
    if h < 32 or w < 32:
        raise ValueError(f"input {h}x{w} too small for five 2x2 poolings")
    g = GraphBuilder(input_shape)
    x = "input"
    for i, width in enumerate((8, 16, 32, 64, 128), start=1):
        x = g.conv_bn(f"c{i}", x, width, 3)
        x = g.maxpool(f"c{i}.pool", x, 2, 2)
    x = g.flatten("flatten", x)
    for i, width in enumerate(fc_widths, start=1):
        x = g.fc(f"fc{i}", x, width)
        x = g.relu(f"fc{i}.relu", x)
    feat = x
    logits = g.fc(f"fc{len(fc_widths) + 1}", feat, num_classes)
    return g.build(
        {"logits": logits, "features": feat},
        num_classes=num_classes,
        preset="baseline_cnn",
        meta={"head": [logits], "last_block": f"fc{len(fc_widths)}"},
    )


def build_mini_inception(num_classes: int = 2, input_shape=(3, 32, 32), width: int = 16) -> ModelSpec:
    """Desk-scale network using every Inception-family block.

    stem -> two residual-inception blocks -> (aux head) -> reduction -> GAP -> FC.
    """
    g = GraphBuilder(input_shape)
    half = max(1, width // 2)
    x = blocks.stem(g, "input", "stem", {"out_channels": width, "kernel": 3}, {"out_channels": width, "kernel": 5})
    x = blocks.residual_inception_block(g, x, "rib1", (half, half, half))
    x = blocks.residual_inception_block(g, x, "rib2", (half, half, half))
    aux = blocks.aux_classifier(g, x, "aux", num_classes, conv_channels=width)
    x = blocks.reduction(g, x, "red", (width, width, width), 2 * width)
    feat = g.gap("gap", x)
    logits = g.fc("fc", feat, num_classes)
    return g.build(
        {"logits": logits, "features": feat, "aux_logits": aux},
        num_classes=num_classes,
        preset="mini_inception",
        meta={"head": ["fc"], "last_block": "red", "aux_weight": 0.3},
    )


def build_model(preset: str, num_classes: int = 2, net_width: int = 16, input_hw=None) -> ModelSpec:
    if preset == "diacnn":
        hw = input_hw or (32, 32)
        return build_diacnn(net_width, num_classes, (3, *hw))
    if preset == "baseline_cnn":
        hw = input_hw or (224, 224)
        return build_baseline_cnn(num_classes, (3, *hw))
    if preset == "mini_inception":
        hw = input_hw or (32, 32)
        return build_mini_inception(num_classes, (3, *hw))
    raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")
