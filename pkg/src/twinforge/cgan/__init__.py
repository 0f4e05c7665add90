from .architecture import DESK, PAPER, PRESETS, ArchitectureError, Preset, get_preset
from .networks import Discriminator, Generator
from .training import (
    GanConfig,
    GanModel,
    TrainingDiverged,
    TrainTrace,
    discriminator_loss,
    generate,
    generator_loss,
    iterations_per_epoch,
    scores,
    spectrum,
    train,
)

__all__ = [
    "DESK",
    "PAPER",
    "PRESETS",
    "ArchitectureError",
    "Discriminator",
    "GanConfig",
    "GanModel",
    "Generator",
    "Preset",
    "TrainTrace",
    "TrainingDiverged",
    "discriminator_loss",
    "generate",
    "generator_loss",
    "get_preset",
    "iterations_per_epoch",
    "scores",
    "spectrum",
    "train",
]
