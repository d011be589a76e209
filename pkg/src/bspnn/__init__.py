"""Boosted vector-quantized kernel-mixture classifier and the KDD-99
intrusion detection pipeline built on it."""

from .booster import (
    BaseLearnerParams,
    BoostConfig,
    BoostedModel,
    train_booster,
)
from .anomaly import DensityModel, calibrate_threshold, train_density
from .vq_grnn import BandwidthSearchSpec, VqGrnnModel, train_base

__version__ = "0.1.0"

__all__ = [
    "BandwidthSearchSpec",
    "BaseLearnerParams",
    "BoostConfig",
    "BoostedModel",
    "DensityModel",
    "VqGrnnModel",
    "calibrate_threshold",
    "train_base",
    "train_booster",
    "train_density",
    "__version__",
]
