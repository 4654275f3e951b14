"""
Prepared series on disk: ``<asset>.csv`` holds the normalized features next to
the raw close and volume, ``<asset>.meta.txt`` the key-value sidecar with the
warmup length, volume scale, bar frequency and split ranges, and
``<asset>.raw.csv`` the regularized bars the ladder resamples from.
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from sigvwap.errors import DataError
from sigvwap.managers.record_manager import RecordManager
from sigvwap.model.market import AssetSeries, FEATURE_PREFIX, NormalizedSeries, SplitRanges
from sigvwap.training.datasets import PreparedAsset
from sigvwap.types import AssetId
from sigvwap.utils import atomic_write_text, read_key_values, write_key_values

logger = logging.getLogger(__name__)

META_SUFFIX = ".meta.txt"
RAW_SUFFIX = ".raw.csv"


def _range_text(bounds: Tuple[int, int]) -> str:
    return f"{bounds[0]}:{bounds[1]}"


def _parse_range(text: str) -> Tuple[int, int]:
    start, _, stop = text.partition(":")
    return int(start), int(stop)


def write_prepared(
    directory: Path, asset: PreparedAsset, extra: Optional[Dict[str, object]] = None
) -> Path:
    directory = Path(directory)
    series, ranges = asset.series, asset.ranges
    csv_path = directory / f"{series.asset_id}.csv"
    atomic_write_text(csv_path, series.frame().to_csv(index=False, float_format="%.17g"))
    meta = {
        "asset_id": series.asset_id,
        "warmup_len": series.warmup_len,
        "volume_scale": repr(series.volume_scale),
        "frequency": series.frequency,
        "features": ",".join(series.feature_names),
        "train": _range_text(ranges.train),
        "validation": _range_text(ranges.validation),
        "test": _range_text(ranges.test),
        **(extra or {}),
    }
    meta_path = directory / f"{series.asset_id}{META_SUFFIX}"
    write_key_values(meta_path, meta, header="sigvwap prepared series")
    return csv_path


def read_prepared(meta_path: Path) -> PreparedAsset:
    meta_path = Path(meta_path)
    meta = read_key_values(meta_path)
    try:
        asset_id = meta["asset_id"]
        features = tuple(meta["features"].split(","))
        csv_path = meta_path.with_name(f"{asset_id}.csv")
        frame = pd.read_csv(csv_path)
        columns = [f"{FEATURE_PREFIX}{name}" for name in features]
        scale = None if meta["volume_scale"] == "None" else float(meta["volume_scale"])
        series = NormalizedSeries(
            asset_id=asset_id,
            features=frame[columns].to_numpy(dtype=np.float64),
            prices=frame["close"].to_numpy(dtype=np.float64),
            volumes=frame["volume"].to_numpy(dtype=np.float64),
            timestamps=frame["timestamp"].to_numpy(dtype=np.int64),
            warmup_len=int(meta["warmup_len"]),
            frequency=int(meta["frequency"]),
            feature_names=features,
            valid=frame["valid"].to_numpy().astype(bool),
            volume_scale=scale,
        )
        ranges = SplitRanges(
            _parse_range(meta["train"]),
            _parse_range(meta["validation"]),
            _parse_range(meta["test"]),
        )
    except (KeyError, ValueError, FileNotFoundError) as exc:
        raise DataError(f"{meta_path}: unreadable prepared series ({exc})") from exc
    return PreparedAsset(series, ranges)


class SeriesManager(RecordManager[AssetId, PreparedAsset]):
    def key_of(self, record: PreparedAsset) -> AssetId:
        return record.series.asset_id

    def load(self, directory: Path) -> None:
        directory = Path(directory)
        metas = sorted(directory.glob(f"*{META_SUFFIX}"))
        if not metas:
            raise DataError(f"{directory}: no prepared series (run `sigvwap prepare` first)")
        for meta_path in metas:
            self.add(read_prepared(meta_path))
        logger.info("Loaded %d prepared series from %s", len(metas), directory)


def write_raw(directory: Path, series: AssetSeries) -> Path:
    path = Path(directory) / f"{series.asset_id}{RAW_SUFFIX}"
    atomic_write_text(path, series.frame().to_csv(index=False, float_format="%.17g"))
    return path


def read_raw_universe(directory: Path) -> Dict[AssetId, AssetSeries]:
    directory = Path(directory)
    paths = sorted(directory.glob(f"*{RAW_SUFFIX}"))
    if not paths:
        raise DataError(f"{directory}: no raw series (run `sigvwap prepare` first)")
    universe: Dict[AssetId, AssetSeries] = {}
    for path in paths:
        asset_id = path.name[: -len(RAW_SUFFIX)]
        frame = pd.read_csv(path)
        timestamps = frame["timestamp"].to_numpy(dtype=np.int64)
        spacing = np.diff(timestamps)
        if len(spacing) and not np.all(spacing == spacing[0]):
            raise DataError(f"{path}: bars are not uniformly spaced")
        universe[asset_id] = AssetSeries(
            asset_id=asset_id,
            timestamps=timestamps,
            prices=frame["close"].to_numpy(dtype=np.float64),
            volumes=frame["volume"].to_numpy(dtype=np.float64),
            frequency=int(spacing[0]) if len(spacing) else 1,
            filled=frame["filled"].to_numpy().astype(bool),
        )
    return universe
