"""RGB-D salient object detection: a two-stream encoder with a top-down
cross-modal fusion chain, coarse-to-fine refinement, deep side
supervision, and the standard saliency evaluation metrics."""

from .config import ABLATION_FLAGS, ModelConfig, TrainConfig
from .losses import LossBreakdown, bce_loss, supervision_loss
from .metrics import (MetricsReport, adaptive_level, e_measure, evaluate_pair,
                      evaluate_directory, f_measure, mae, pr_curve,
                      precision_recall, s_measure)
from .model import RgbdSaliencyModel, SaliencyPrediction, build_model, \
    count_parameters

__version__ = "0.1.0"

__all__ = [
    "ABLATION_FLAGS",
    "LossBreakdown",
    "MetricsReport",
    "ModelConfig",
    "RgbdSaliencyModel",
    "SaliencyPrediction",
    "TrainConfig",
    "adaptive_level",
    "bce_loss",
    "build_model",
    "count_parameters",
    "e_measure",
    "evaluate_directory",
    "evaluate_pair",
    "f_measure",
    "mae",
    "precision_recall",
    "pr_curve",
    "s_measure",
    "supervision_loss",
]
