"""Architecture graphs, parameters, freezing and checkpoints."""

from diacnn.netgraph.blocks import (
    build_aux_classifier,
    build_inception_module,
    build_reduction,
    build_residual_inception_block,
    build_stem,
)
from diacnn.netgraph.checkpoint import (
    BadMagicError,
    Checkpoint,
    CheckpointError,
    PayloadMismatchError,
    TruncatedCheckpointError,
    VersionMismatchError,
    load_checkpoint,
    save_checkpoint,
)
from diacnn.netgraph.forward import ForwardResult, forward, model_loss, run_graph
from diacnn.netgraph.freeze import FREEZE_PRESETS, set_trainable
from diacnn.netgraph.graph import GraphBuilder, Layer, ModelSpec
from diacnn.netgraph.models import PRESETS, build_baseline_cnn, build_diacnn, build_mini_inception, build_model
from diacnn.netgraph.params import Param, ParamStore, count_trainable, init_params, validate_params

__all__ = [
    "BadMagicError",
    "Checkpoint",
    "CheckpointError",
    "FREEZE_PRESETS",
    "ForwardResult",
    "GraphBuilder",
    "Layer",
    "ModelSpec",
    "PRESETS",
    "Param",
    "ParamStore",
    "PayloadMismatchError",
    "TruncatedCheckpointError",
    "VersionMismatchError",
    "build_aux_classifier",
    "build_baseline_cnn",
    "build_diacnn",
    "build_inception_module",
    "build_mini_inception",
    "build_model",
    "build_reduction",
    "build_residual_inception_block",
    "build_stem",
    "count_trainable",
    "forward",
    "init_params",
    "load_checkpoint",
    "model_loss",
    "run_graph",
    "save_checkpoint",
    "set_trainable",
    "validate_params",
]
