import logging
from pathlib import Path
from typing import Dict, Mapping, Optional

import numpy as np
import pandas as pd

from sigvwap.errors import DataError, GapError
from sigvwap.model.market import AssetSeries, GapReport
from sigvwap.types import AssetId
from sigvwap.utils import parse_timestamp

logger = logging.getLogger(__name__)

DEFAULT_SCHEMA: Dict[str, str] = {"timestamp": "timestamp", "price": "close", "volume": "volume"}
DEFAULT_GAP_THRESHOLD = 6

# header is line 1 of the file
_FIRST_DATA_LINE = 2


def _parse_column(frame: pd.DataFrame, column: str, role: str, path: Path) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() | ~np.isfinite(values.astype(float))
    if bad.any():
        line = int(np.flatnonzero(bad.to_numpy())[0]) + _FIRST_DATA_LINE
        raw = frame[column].iloc[line - _FIRST_DATA_LINE]
        raise DataError(f"{path}:{line}: malformed {role} {raw!r}")
    return values.to_numpy(dtype=np.float64)


def load_series(
    path: Path,
    schema: Optional[Mapping[str, str]] = None,
    asset_id: Optional[AssetId] = None,
    gap_threshold: int = DEFAULT_GAP_THRESHOLD,
    delimiter: Optional[str] = None,
) -> AssetSeries:
    """
    Reads a delimited text file with a header into an AssetSeries.

    Rows are sorted and deduplicated by timestamp (the last row wins), the bar
    frequency is the modal spacing, and gaps of up to ``gap_threshold``
    missing bars are filled (price carried forward, zero volume, ``filled``
    set). Longer gaps or spacing that is not a multiple of the frequency raise
    :class:`GapError` carrying the report.
    """
    path = Path(path)
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    asset_id = asset_id or path.stem
    if not path.exists():
        raise DataError(f"{path}: no such file")

    try:
        sep = delimiter or _sniff_delimiter(path)
        frame = pd.read_csv(path, sep=sep, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError as exc:
        raise DataError(f"{path}: empty series") from exc
    except pd.errors.ParserError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if frame.empty:
        raise DataError(f"{path}: empty series")

    missing = [col for col in schema.values() if col not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}, found {list(frame.columns)}")

    timestamps = []
    for offset, raw in enumerate(frame[schema["timestamp"]]):
        try:
            timestamps.append(parse_timestamp(raw))
        except (TypeError, ValueError) as exc:
            line = offset + _FIRST_DATA_LINE
            raise DataError(f"{path}:{line}: malformed timestamp {raw!r}") from exc
    prices = _parse_column(frame, schema["price"], "price", path)
    volumes = _parse_column(frame, schema["volume"], "volume", path)
    invalid = np.flatnonzero((prices <= 0) | (volumes < 0))
    if len(invalid):
        idx = invalid[0]
        raise DataError(
            f"{path}:{idx + _FIRST_DATA_LINE}: price must be > 0 and volume >= 0, "
            f"got {prices[idx]}, {volumes[idx]}"
        )

    bars = pd.DataFrame({"timestamp": timestamps, "close": prices, "volume": volumes})
    duplicated = bars["timestamp"].duplicated(keep="last")
    if duplicated.any():
        logger.warning(
            "%s: dropped %d duplicate timestamps (last row wins)", asset_id, duplicated.sum()
        )
        bars = bars[~duplicated]
    bars = bars.sort_values("timestamp", kind="stable").reset_index(drop=True)
    return regularize(asset_id, bars, gap_threshold)


def _sniff_delimiter(path: Path) -> str:
    with open(path, encoding="utf-8") as file:
        header = file.readline()
    for candidate in (",", "\t", ";", "|"):
        if candidate in header:
            return candidate
    return ","


def infer_frequency(timestamps: np.ndarray) -> int:
    spacing = np.diff(timestamps)
    if len(spacing) == 0:
        raise DataError("cannot infer bar frequency from a single bar")
    return int(pd.Series(spacing).mode().iloc[0])


def regularize(
    asset_id: AssetId,
    bars: pd.DataFrame,
    gap_threshold: int = DEFAULT_GAP_THRESHOLD,
    frequency: Optional[int] = None,
) -> AssetSeries:
    timestamps = bars["timestamp"].to_numpy(dtype=np.int64)
    frequency = frequency or infer_frequency(timestamps)
    spacing = np.diff(timestamps)

    report = GapReport(asset_id)
    for idx in np.flatnonzero(spacing != frequency):
        if spacing[idx] % frequency:
            report.gaps.append((int(timestamps[idx]), int(spacing[idx] // frequency)))
            raise GapError(
                f"{asset_id}: spacing {spacing[idx]} s after {timestamps[idx]} "
                f"is not a multiple of {frequency} s",
                report,
            )
        report.gaps.append((int(timestamps[idx]), int(spacing[idx] // frequency) - 1))

    if report.gaps:
        logger.warning("Gap report: %s", report)
    if report.largest > gap_threshold:
        raise GapError(
            f"{asset_id}: gap of {report.largest} bars exceeds threshold {gap_threshold}", report
        )

    grid = np.arange(timestamps[0], timestamps[-1] + frequency, frequency, dtype=np.int64)
    full = bars.set_index("timestamp").reindex(grid)
    filled = full["close"].isna().to_numpy()
    full["close"] = full["close"].ffill()
    full["volume"] = full["volume"].fillna(0.0)

    return AssetSeries(
        asset_id=asset_id,
        timestamps=grid,
        prices=full["close"].to_numpy(),
        volumes=full["volume"].to_numpy(),
        frequency=frequency,
        filled=filled,
        gap_report=report,
    )


def resample_series(series: AssetSeries, factor: int) -> AssetSeries:
    """Aggregates ``factor`` consecutive bars: first timestamp, last close, summed volume."""
    if factor < 1:
        raise DataError(f"resample factor must be >= 1, got {factor}")
    if factor == 1:
        return series
    usable = (len(series) // factor) * factor
    if usable == 0:
        raise DataError(
            f"{series.asset_id}: {len(series)} bars cannot form one {factor}-bar group"
        )
    groups = np.arange(usable) // factor
    frame = series.frame().iloc[:usable].assign(group=groups)
    agg = frame.groupby("group").agg(
        timestamp=("timestamp", "first"),
        close=("close", "last"),
        volume=("volume", "sum"),
        filled=("filled", "any"),
    )
    return AssetSeries(
        asset_id=series.asset_id,
        timestamps=agg["timestamp"].to_numpy(),
        prices=agg["close"].to_numpy(),
        volumes=agg["volume"].to_numpy(),
        frequency=series.frequency * factor,
        filled=agg["filled"].to_numpy(dtype=bool),
    )
