import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping

from sigvwap.config import ExperimentConfig
from sigvwap.data_pipeline import prepare_asset
from sigvwap.data_pipeline.windows import segment_windows
from sigvwap.errors import DataError
from sigvwap.model.market import AssetSeries, NormalizedSeries, SampleWindow, SplitRanges
from sigvwap.types import AssetId

logger = logging.getLogger(__name__)


@dataclass
class PreparedAsset:
    series: NormalizedSeries
    ranges: SplitRanges


@dataclass
class WindowSets:
    """Sample windows per segment, ordered by (asset_id, anchor)."""

    train: List[SampleWindow] = field(default_factory=list)
    validation: List[SampleWindow] = field(default_factory=list)
    test: List[SampleWindow] = field(default_factory=list)
    holdout: List[SampleWindow] = field(default_factory=list)

    def segment(self, name: str) -> List[SampleWindow]:
        return getattr(self, name)

    def only(self, asset_id: AssetId) -> "WindowSets":
        return WindowSets(
            **{
                name: [w for w in self.segment(name) if w.asset_id == asset_id]
                for name in ("train", "validation", "test", "holdout")
            }
        )

    def assets(self) -> List[AssetId]:
        segments = ("train", "test", "holdout")
        return sorted({w.asset_id for name in segments for w in self.segment(name)})


def prepare_universe(
    config: ExperimentConfig, raw: Mapping[AssetId, AssetSeries]
) -> Dict[AssetId, PreparedAsset]:
    prepared = {}
    for asset_id in sorted(raw):
        series, ranges = prepare_asset(
            raw[asset_id],
            config.window_bars,
            config.shift,
            config.split,
            config.segment_bars,
            config.features,
        )
        prepared[asset_id] = PreparedAsset(series, ranges)
    return prepared


def build_window_sets(
    config: ExperimentConfig, prepared: Mapping[AssetId, PreparedAsset]
) -> WindowSets:
    """
    Training and validation windows come from assets not held out; the test
    segment of every held-out asset becomes the ``holdout`` set.
    """
    unknown = sorted(set(config.holdout_assets) - set(prepared))
    if unknown:
        raise DataError(f"held-out assets {unknown} are not in the data")
    sets = WindowSets()
    for asset_id in sorted(prepared):
        asset = prepared[asset_id]

        def windows(segment: str, stride: int) -> List[SampleWindow]:
            return segment_windows(
                asset.series,
                asset.ranges,
                segment,
                config.signature_lookback,
                config.lookback,
                config.horizon,
                stride,
                config.anchor_phase,
            )

        if asset_id in config.holdout_assets:
            sets.holdout.extend(windows("test", config.eval_stride))
            continue
        sets.train.extend(windows("train", config.stride))
        sets.validation.extend(windows("validation", config.eval_stride))
        sets.test.extend(windows("test", config.eval_stride))
    logger.info(
        "Windows: %d train, %d validation, %d test, %d holdout",
        len(sets.train),
        len(sets.validation),
        len(sets.test),
        len(sets.holdout),
    )
    return sets
