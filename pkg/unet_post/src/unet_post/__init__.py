"""Learned post-processing for cone-beam reconstructions.

Residual U-Net variants (2D per-plane, multi-plane fusion, 3D patches)
trained on paired degraded/clean volumes in the reconstruction
toolkit's file format.
"""

from .config import MpWeights, TrainConfig, UNetConfig
from .infer import combine_mp, infer_volume
from .loo import format_table, loo_harness
from .model import ResidualUNet, build_unet, count_parameters
from .train import TrainResult, load_weights, save_weights, train, train_on_pairs
from .volio import VolumeFile, VolumeFormatError, read_volume, write_volume

__all__ = [
    "MpWeights", "TrainConfig", "UNetConfig",
    "combine_mp", "infer_volume",
    "format_table", "loo_harness",
    "ResidualUNet", "build_unet", "count_parameters",
    "TrainResult", "load_weights", "save_weights", "train", "train_on_pairs",
    "VolumeFile", "VolumeFormatError", "read_volume", "write_volume",
]

__version__ = "0.1.0"
