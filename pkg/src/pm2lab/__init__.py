"""pm2lab: paired moment matching for multi-source domain adaptation,
with a synthetic paired-domain benchmark and fairness evaluation."""

from .autodiff import ShapeError, Tensor, apply_op
from .datagen import GenConfig, PairedTriple, Sample, generate, load_dataset, save_dataset
from .losses import (
    LossWeights,
    au_loss,
    discrepancy_loss,
    overall_moment_distance,
    pair_moment_distance,
    pm2_loss,
    step_losses,
)
from .metrics import (
    MetricsReport,
    equal_opportunity,
    evaluate,
    f1,
    statistical_parity_difference,
)
from .model import (
    ModelConfig,
    ModelParams,
    classify,
    encode,
    init_params,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from .trainer import MODES, AdamW, TrainConfig, TrainingDiverged, freeze_mask, train

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "GenConfig",
    "LossWeights",
    "MetricsReport",
    "MODES",
    "ModelConfig",
    "ModelParams",
    "PairedTriple",
    "Sample",
    "ShapeError",
    "Tensor",
    "TrainConfig",
    "TrainingDiverged",
    "apply_op",
    "au_loss",
    "classify",
    "discrepancy_loss",
    "encode",
    "equal_opportunity",
    "evaluate",
    "f1",
    "freeze_mask",
    "generate",
    "init_params",
    "load_checkpoint",
    "load_dataset",
    "overall_moment_distance",
    "pair_moment_distance",
    "pm2_loss",
    "predict",
    "save_checkpoint",
    "save_dataset",
    "statistical_parity_difference",
    "step_losses",
    "train",
]
