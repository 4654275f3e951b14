from sigvwap.managers.checkpoint_manager import Checkpoint, CheckpointManager
from sigvwap.managers.record_manager import RecordManager
from sigvwap.managers.series_manager import (
    SeriesManager,
    read_prepared,
    read_raw_universe,
    write_prepared,
    write_raw,
)

__all__ = [
    "Checkpoint",
    "CheckpointManager",
    "RecordManager",
    "SeriesManager",
    "read_prepared",
    "read_raw_universe",
    "write_prepared",
    "write_raw",
]
