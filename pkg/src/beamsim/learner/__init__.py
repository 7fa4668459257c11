from .widths import regnet_widths
from .nets import (
    AutoFusion,
    FusionModel,
    GanFusion,
    ModelConfig,
    ModelOutput,
    autofusion,
    build_model,
    ganfusion_step,
    predict,
)
from .losses import total_loss
from .train import TrainSchedule, load_checkpoint, save_checkpoint, save_history_csv, train
from .estimators import FusionBeamPredictor, SoftmaxRefClassifier

__all__ = [
    "AutoFusion",
    "FusionBeamPredictor",
    "FusionModel",
    "GanFusion",
    "ModelConfig",
    "ModelOutput",
    "SoftmaxRefClassifier",
    "TrainSchedule",
    "autofusion",
    "build_model",
    "ganfusion_step",
    "load_checkpoint",
    "predict",
    "regnet_widths",
    "save_checkpoint",
    "save_history_csv",
    "total_loss",
    "train",
]
