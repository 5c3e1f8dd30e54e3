"""Meta-learning trainer for the bricksketch engine.

Trains the embedding table, scan networks, and decode network on synthetic
Zipf episodes over a single memory brick and exports them as a weight
bundle JSON the engine loads directly.
"""

from .config import TrainConfig
from .export import bundle_dict, export_bundle
from .losses import LossComputer
from .model import SketchModel
from .tasks import Task, sample_task
from .training import train

__all__ = [
    "TrainConfig",
    "SketchModel",
    "LossComputer",
    "Task",
    "sample_task",
    "train",
    "export_bundle",
    "bundle_dict",
]
