from typing import Sequence, Tuple

from sigvwap.data_pipeline.loader import (
    DEFAULT_GAP_THRESHOLD,
    DEFAULT_SCHEMA,
    load_series,
    resample_series,
)
from sigvwap.data_pipeline.normalize import (
    DEFAULT_FEATURES,
    FEATURES,
    minmax_scale_volume,
    rolling_median,
    rolling_median_normalize,
)
from sigvwap.data_pipeline.synthetic import MarketProfile, synthesize_market, synthesize_universe
from sigvwap.data_pipeline.windows import (
    make_windows,
    minimum_length,
    segment_windows,
    temporal_split,
    window_count,
)
from sigvwap.model.market import AssetSeries, NormalizedSeries, SplitRanges, SplitSpec


def prepare_asset(
    series: AssetSeries,
    window_bars: int,
    shift_bars: int,
    split: SplitSpec,
    segment_bars: int,
    features: Sequence[str] = DEFAULT_FEATURES,
) -> Tuple[NormalizedSeries, SplitRanges]:
    """Normalize, scale the volume feature and split one asset."""
    normalized = rolling_median_normalize(series, window_bars, shift_bars, features)
    ranges = temporal_split(normalized, split, segment_bars)
    return minmax_scale_volume(normalized, split), ranges


__all__ = [
    "DEFAULT_FEATURES",
    "DEFAULT_GAP_THRESHOLD",
    "DEFAULT_SCHEMA",
    "FEATURES",
    "MarketProfile",
    "load_series",
    "make_windows",
    "minimum_length",
    "minmax_scale_volume",
    "prepare_asset",
    "resample_series",
    "rolling_median",
    "rolling_median_normalize",
    "segment_windows",
    "synthesize_market",
    "synthesize_universe",
    "temporal_split",
    "window_count",
]
