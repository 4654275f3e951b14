from sigvwap.nn_core.tensor import DiffRecord, Tensor, backward, recording
from sigvwap.nn_core.parameter_store import ParameterStore
from sigvwap.nn_core.optim import Adam, PlateauSchedule, adam_step
from sigvwap.nn_core.layers import dense, glu, grn, layer_norm
from sigvwap.nn_core.ops import elu

__all__ = [
    "Adam",
    "DiffRecord",
    "ParameterStore",
    "PlateauSchedule",
    "Tensor",
    "adam_step",
    "backward",
    "dense",
    "elu",
    "glu",
    "grn",
    "layer_norm",
    "recording",
]
