import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict

from sigvwap.allocator import SubAllocator, base_curve_of, static_sub_allocator
from sigvwap.errors import CheckpointError
from sigvwap.managers.record_manager import RecordManager
from sigvwap.nn_core.parameter_store import MANIFEST_SUFFIX, ParameterStore

logger = logging.getLogger(__name__)


@dataclass
class Checkpoint:
    prefix: Path
    store: ParameterStore

    @property
    def bin_seconds(self) -> int:
        return int(self.store.metadata["bin_seconds"])

    @property
    def horizon(self) -> int:
        return int(self.store.metadata["horizon"])


class CheckpointManager(RecordManager[int, Checkpoint]):
    """Frequency-ladder checkpoints keyed by bin duration in seconds."""

    def key_of(self, record: Checkpoint) -> int:
        return record.bin_seconds

    def load(self, directory: Path) -> None:
        directory = Path(directory)
        manifests = sorted(directory.glob(f"*{MANIFEST_SUFFIX}"))
        if not manifests:
            raise CheckpointError(f"{directory}: no checkpoints")
        for manifest in manifests:
            prefix = manifest.with_name(manifest.name[: -len(MANIFEST_SUFFIX)])
            store = ParameterStore.load(prefix)
            if "bin_seconds" not in store.metadata or "horizon" not in store.metadata:
                raise CheckpointError(f"{manifest}: no bin duration recorded")
            self.add(Checkpoint(prefix, store))
        logger.info("Loaded checkpoints for %s s bins", sorted(self.records()))

    def sub_allocators(self) -> Dict[int, SubAllocator]:
        """
        The static base curve of each rung, keyed by the parent bin duration it
        subdivides (``horizon * bin_seconds``).
        """
        return {
            checkpoint.horizon * seconds: static_sub_allocator(base_curve_of(checkpoint.store))
            for seconds, checkpoint in self.records().items()
        }
