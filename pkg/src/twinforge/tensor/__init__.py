from .checkpoint import CorruptCheckpoint, load_checkpoint, save_checkpoint
from .layers import (
    KINDS,
    BackwardError,
    BatchNorm,
    Concat,
    Conv1d,
    EmbedReshape,
    Layer,
    LeakyReLU,
    ProjectReshape,
    ReLU,
    ShapeError,
    Sigmoid,
    TConv1d,
    param_count,
    sigmoid,
)
from .optim import AdamState, NonFiniteGradient, adam_step

__all__ = [
    "KINDS",
    "AdamState",
    "BackwardError",
    "BatchNorm",
    "Concat",
    "Conv1d",
    "CorruptCheckpoint",
    "EmbedReshape",
    "Layer",
    "LeakyReLU",
    "NonFiniteGradient",
    "ProjectReshape",
    "ReLU",
    "ShapeError",
    "Sigmoid",
    "TConv1d",
    "adam_step",
    "load_checkpoint",
    "param_count",
    "save_checkpoint",
    "sigmoid",
]
