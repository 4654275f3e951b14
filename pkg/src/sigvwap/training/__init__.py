from sigvwap.training.datasets import (
    PreparedAsset,
    WindowSets,
    build_window_sets,
    prepare_universe,
)
from sigvwap.training.model import VwapModel, WindowBatch, vwap_loss
from sigvwap.training.trainer import (
    ExperimentRun,
    TrainResult,
    TrainState,
    evaluate,
    finetune_from,
    frequency_lr_scale,
    run_experiment,
    run_variant_matrix,
    train,
    train_ladder,
    validation_loss,
    variable_importance,
    write_training_log,
)

__all__ = [
    "ExperimentRun",
    "PreparedAsset",
    "TrainResult",
    "TrainState",
    "VwapModel",
    "WindowBatch",
    "WindowSets",
    "build_window_sets",
    "evaluate",
    "finetune_from",
    "frequency_lr_scale",
    "prepare_universe",
    "run_experiment",
    "run_variant_matrix",
    "train",
    "train_ladder",
    "validation_loss",
    "variable_importance",
    "vwap_loss",
    "write_training_log",
]
