from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, Generic, Iterator, Optional, TypeVar

K = TypeVar("K")
T = TypeVar("T")


class RecordManager(ABC, Generic[K, T]):
    """Keyed registry of records loaded from a directory; keys are unique."""

    def __init__(self):
        self._records: Dict[K, T] = {}

    @abstractmethod
    def key_of(self, record: T) -> K:
        raise NotImplementedError()

    @abstractmethod
    def load(self, directory: Path) -> None:
        raise NotImplementedError()

    def add(self, record: T) -> None:
        key = self.key_of(record)
        if key in self._records:
            raise RuntimeError(f"Duplicate key {key!r} for {type(record).__name__}")
        self._records[key] = record

    def get(self, key: K) -> Optional[T]:
        return self._records.get(key)

    def records(self) -> Dict[K, T]:
        return dict(sorted(self._records.items()))

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[K]:
        return iter(self.records())

    def __repr__(self):
        return "\n".join(f"{key}: {value}" for key, value in self.records().items())
