import logging
from pathlib import Path
from typing import Optional

from sigvwap.config import ExperimentConfig
from sigvwap.managers.checkpoint_manager import CheckpointManager
from sigvwap.managers.series_manager import SeriesManager
from sigvwap.training.datasets import WindowSets, build_window_sets

logger = logging.getLogger(__name__)


class ExecutionDesk:
    """Prepared series of a data directory plus, optionally, a ladder of checkpoints."""

    def __init__(self, data_dir: Optional[Path] = None, ladder_dir: Optional[Path] = None):
        self.data_dir = data_dir
        self.ladder_dir = ladder_dir
        self.series_manager = SeriesManager()
        self.checkpoint_manager = CheckpointManager()

        self.load()

    def load(self):
        if self.data_dir is not None:
            self.series_manager.load(Path(self.data_dir))
        if self.ladder_dir is not None:
            self.checkpoint_manager.load(Path(self.ladder_dir))

    def window_sets(self, config: ExperimentConfig) -> WindowSets:
        return build_window_sets(config, self.series_manager.records())
