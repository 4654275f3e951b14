from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd

from sigvwap.errors import ConfigError
from sigvwap.model.record import Record
from sigvwap.types import AssetId, Seconds
from sigvwap.utils import get_date_iso

# feature columns in tabular views, kept apart from the raw close and volume
FEATURE_PREFIX = "x_"


@dataclass
class MarketBar(Record):
    timestamp: Seconds
    price: float
    volume: float

    def validate(self) -> None:
        assert np.isfinite(self.price) and self.price > 0, self.as_dict()
        assert np.isfinite(self.volume) and self.volume >= 0, self.as_dict()


@dataclass
class GapReport(Record):
    """Gaps found while loading: (timestamp of the bar before the gap, missing bar count)."""

    asset_id: AssetId
    gaps: List[Tuple[Seconds, int]] = field(default_factory=list)

    @property
    def filled_bars(self) -> int:
        return sum(missing for _, missing in self.gaps)

    @property
    def largest(self) -> int:
        return max((missing for _, missing in self.gaps), default=0)

    def validate(self) -> None:
        assert all(missing > 0 for _, missing in self.gaps), self.as_dict()

    def __str__(self):
        if not self.gaps:
            return f"{self.asset_id}: no gaps"
        first_ts, first_missing = self.gaps[0]
        return (
            f"{self.asset_id}: {len(self.gaps)} gaps, {self.filled_bars} missing bars, "
            f"first after {get_date_iso(first_ts)} ({first_missing} bars)"
        )


@dataclass
class AssetSeries(Record):
    """Uniformly spaced bars of one asset; ``filled`` marks bars synthesised over gaps."""

    asset_id: AssetId
    timestamps: np.ndarray
    prices: np.ndarray
    volumes: np.ndarray
    frequency: Seconds
    filled: Optional[np.ndarray] = None
    gap_report: Optional[GapReport] = field(default=None, repr=False)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.prices = np.asarray(self.prices, dtype=np.float64)
        self.volumes = np.asarray(self.volumes, dtype=np.float64)
        if self.filled is None:
            self.filled = np.zeros(len(self.timestamps), dtype=bool)
        super().__post_init__()

    def validate(self) -> None:
        n = len(self.timestamps)
        assert len(self.prices) == n and len(self.volumes) == n, self.asset_id
        assert self.filled is not None and len(self.filled) == n, self.asset_id
        assert self.frequency > 0, self.asset_id
        assert np.all(np.diff(self.timestamps) > 0), f"{self.asset_id}: timestamps not increasing"
        assert np.all(np.isfinite(self.prices)) and np.all(self.prices > 0), self.asset_id
        assert np.all(np.isfinite(self.volumes)) and np.all(self.volumes >= 0), self.asset_id

    def __len__(self) -> int:
        return len(self.timestamps)

    def bars(self) -> Iterator[MarketBar]:
        for ts, price, volume in zip(self.timestamps, self.prices, self.volumes):
            yield MarketBar(int(ts), float(price), float(volume))

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "timestamp": self.timestamps,
                "close": self.prices,
                "volume": self.volumes,
                "filled": self.filled,
            }
        )


@dataclass
class NormalizedSeries(Record):
    """
    Model features of one asset after the normalization warmup has been dropped.
    Row ``i`` corresponds to raw bar ``warmup_len + i``; ``valid`` is False for
    rows that must never enter a sample window.
    """

    asset_id: AssetId
    features: np.ndarray
    prices: np.ndarray
    volumes: np.ndarray
    timestamps: np.ndarray
    warmup_len: int
    frequency: Seconds
    feature_names: Tuple[str, ...]
    valid: np.ndarray
    volume_scale: Optional[float] = None

    def validate(self) -> None:
        n = len(self.prices)
        assert self.features.shape == (n, len(self.feature_names)), (
            self.asset_id,
            self.features.shape,
        )
        assert len(self.volumes) == n and len(self.timestamps) == n, self.asset_id
        assert len(self.valid) == n, self.asset_id
        assert np.all(np.isfinite(self.features)), f"{self.asset_id}: non-finite features"
        assert self.warmup_len >= 0, self.asset_id

    def __len__(self) -> int:
        return len(self.prices)

    @property
    def num_features(self) -> int:
        return len(self.feature_names)

    @property
    def feature_columns(self) -> List[str]:
        return [f"{FEATURE_PREFIX}{name}" for name in self.feature_names]

    def frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.features, columns=self.feature_columns)
        df.insert(0, "timestamp", self.timestamps)
        df["close"] = self.prices
        df["volume"] = self.volumes
        df["valid"] = self.valid.astype(int)
        return df


@dataclass
class SampleWindow(Record):
    asset_id: AssetId
    anchor: int
    signature_window: np.ndarray
    local_window: np.ndarray
    target_prices: np.ndarray
    target_volumes: np.ndarray
    # order duration of the horizon, for the duration breakdown
    bin_seconds: Seconds = 3600

    def validate(self) -> None:
        h = len(self.target_prices)
        assert h >= 1 and len(self.target_volumes) == h, self.asset_id
        assert self.signature_window.ndim == 2 and self.local_window.ndim == 2, self.asset_id
        assert self.signature_window.shape[1] == self.local_window.shape[1], self.asset_id

    @property
    def horizon(self) -> int:
        return len(self.target_prices)

    @property
    def lookback(self) -> int:
        return self.local_window.shape[0] - self.horizon + 1


@dataclass
class SplitSpec(Record):
    train_fraction: float = 0.8
    validation_fraction: float = 0.2

    def validate(self) -> None:
        problems = [
            f"{name} must lie in (0, 1), got {value}"
            for name, value in self.as_dict().items()
            if not 0.0 < value < 1.0
        ]
        if problems:
            raise ConfigError(problems)


@dataclass
class SplitRanges(Record):
    """Half-open ``(start, stop)`` row ranges, contiguous and chronological."""

    train: Tuple[int, int]
    validation: Tuple[int, int]
    test: Tuple[int, int]

    def validate(self) -> None:
        assert 0 <= self.train[0] < self.train[1], self.as_dict()
        assert self.train[1] == self.validation[0] < self.validation[1], self.as_dict()
        assert self.validation[1] == self.test[0] < self.test[1], self.as_dict()

    def lengths(self) -> Tuple[int, int, int]:
        return (
            self.train[1] - self.train[0],
            self.validation[1] - self.validation[0],
            self.test[1] - self.test[0],
        )

    def segment(self, name: str) -> Tuple[int, int]:
        return getattr(self, name)
