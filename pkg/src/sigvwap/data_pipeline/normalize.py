"""
Causal rolling-median normalization and the per-bar feature registry.

The volume at bar t is divided by the median of the ``window`` bars ending
``shift`` bars before t, so no bar later than ``t - shift`` influences it.
"""

import logging
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
import pandas as pd

from sigvwap.errors import DataError
from sigvwap.model.market import AssetSeries, NormalizedSeries, SplitRanges, SplitSpec

logger = logging.getLogger(__name__)

DEFAULT_FEATURES: Tuple[str, ...] = ("log_return", "volume")


def rolling_median(values: np.ndarray, window_bars: int, shift_bars: int) -> np.ndarray:
    """``out[t] = median(values[t - shift - window + 1 .. t - shift])``; NaN where undefined."""
    return (
        pd.Series(values)
        .rolling(window=window_bars, min_periods=window_bars)
        .median()
        .shift(shift_bars)
        .to_numpy()
    )


def _log_return(series: AssetSeries, _window: int, _shift: int) -> Tuple[np.ndarray, np.ndarray]:
    returns = np.zeros(len(series))
    returns[1:] = np.diff(np.log(series.prices))
    return returns, np.ones(len(series), dtype=bool)


def _median_ratio(values: np.ndarray, window: int, shift: int) -> Tuple[np.ndarray, np.ndarray]:
    median = rolling_median(values, window, shift)
    usable = np.isfinite(median) & (median > 0)
    ratio = np.zeros(len(values))
    np.divide(values, median, out=ratio, where=usable)
    return ratio, usable


def _volume(series: AssetSeries, window: int, shift: int) -> Tuple[np.ndarray, np.ndarray]:
    return _median_ratio(series.volumes, window, shift)


def _price_level(series: AssetSeries, window: int, shift: int) -> Tuple[np.ndarray, np.ndarray]:
    ratio, usable = _median_ratio(series.prices, window, shift)
    return np.where(usable, ratio - 1.0, 0.0), usable


FeatureFn = Callable[[AssetSeries, int, int], Tuple[np.ndarray, np.ndarray]]

# name -> (values, usable mask); "volume" is the feature min-max scaling applies to
FEATURES: Dict[str, FeatureFn] = {
    "log_return": _log_return,
    "volume": _volume,
    "price_level": _price_level,
}


def rolling_median_normalize(
    series: AssetSeries,
    window_bars: int,
    shift_bars: int,
    features: Sequence[str] = DEFAULT_FEATURES,
) -> NormalizedSeries:
    if window_bars < 1 or shift_bars < 0:
        raise DataError(f"need window >= 1 and shift >= 0, got {window_bars}, {shift_bars}")
    warmup = window_bars + shift_bars
    if len(series) <= warmup:
        raise DataError(
            f"{series.asset_id}: {len(series)} bars, need more than {warmup} for normalization"
        )
    unknown = [name for name in features if name not in FEATURES]
    if unknown:
        raise DataError(f"unknown features {unknown}; known: {sorted(FEATURES)}")

    columns, valid = [], ~series.filled.copy()
    for name in features:
        values, usable = FEATURES[name](series, window_bars, shift_bars)
        columns.append(values)
        valid &= usable

    zero_medians = int((~valid[warmup:] & ~series.filled[warmup:]).sum())
    if zero_medians:
        logger.warning(
            "%s: %d rows with a zero rolling median excluded from sampling",
            series.asset_id,
            zero_medians,
        )

    return NormalizedSeries(
        asset_id=series.asset_id,
        features=np.stack(columns, axis=1)[warmup:],
        prices=series.prices[warmup:].copy(),
        volumes=series.volumes[warmup:].copy(),
        timestamps=series.timestamps[warmup:].copy(),
        warmup_len=warmup,
        frequency=series.frequency,
        feature_names=tuple(features),
        valid=valid[warmup:],
    )


def minmax_scale_volume(series: NormalizedSeries, split: SplitSpec) -> NormalizedSeries:
    """
    Divides the volume feature by its maximum over the training portion
    (train + validation rows). Later rows may exceed 1.
    """
    if "volume" not in series.feature_names:
        return series
    stop = outer_train_rows(len(series), split)
    if stop < 1:
        raise DataError(f"{series.asset_id}: empty training segment")
    column = series.feature_names.index("volume")
    train_values = series.features[:stop, column][series.valid[:stop]]
    scale = float(train_values.max()) if len(train_values) else 0.0
    if scale <= 0:
        raise DataError(f"{series.asset_id}: degenerate volume (training maximum is {scale})")

    features = series.features.copy()
    features[:, column] /= scale
    return NormalizedSeries(
        asset_id=series.asset_id,
        features=features,
        prices=series.prices,
        volumes=series.volumes,
        timestamps=series.timestamps,
        warmup_len=series.warmup_len,
        frequency=series.frequency,
        feature_names=series.feature_names,
        valid=series.valid,
        volume_scale=scale,
    )


def outer_train_rows(n: int, split: SplitSpec) -> int:
    return int(np.floor(split.train_fraction * n))


def split_rows(n: int, split: SplitSpec) -> SplitRanges:
    outer = outer_train_rows(n, split)
    validation = int(np.floor(split.validation_fraction * outer))
    train = outer - validation
    return SplitRanges((0, train), (train, outer), (outer, n))
