"""From-scratch 1D convolutional autoencoders over SFC-ordered data."""

from .checkpoint import load_checkpoint, load_loss_csv, save_checkpoint, save_loss_csv
from .layers import LayerSpec
from .model import Model, build_model
from .presets import PRESETS, build_preset, preset_specs
from .training import Adam, GradCheck, TrainConfig, TrainReport, evaluate, gradient_check, mse, reconstruct, train

__all__ = [
    "Adam", "GradCheck", "LayerSpec", "Model", "PRESETS", "TrainConfig", "TrainReport",
    "build_model", "build_preset", "evaluate", "gradient_check", "load_checkpoint",
    "load_loss_csv", "mse", "preset_specs", "reconstruct", "save_checkpoint",
    "save_loss_csv", "train",
]
