import logging
from typing import Iterator, List, Optional, Tuple

import numpy as np

from sigvwap.errors import DataError
from sigvwap.model.market import NormalizedSeries, SampleWindow, SplitRanges, SplitSpec
from sigvwap.data_pipeline.normalize import split_rows

logger = logging.getLogger(__name__)

SEGMENTS = ("train", "validation", "test")


def minimum_length(split: SplitSpec, segment_bars: int) -> int:
    """Smallest series length whose three segments all hold ``segment_bars`` rows."""
    n = 3 * segment_bars
    while min(_segment_lengths(n, split)) < segment_bars:
        n += 1
    return n


def _segment_lengths(n: int, split: SplitSpec) -> Tuple[int, int, int]:
    outer = int(np.floor(split.train_fraction * n))
    validation = int(np.floor(split.validation_fraction * outer))
    return outer - validation, validation, n - outer


def temporal_split(series, split: SplitSpec, segment_bars: int = 1) -> SplitRanges:
    """
    Chronological train / validation / test row ranges. ``segment_bars`` is
    the number of rows one sample needs (``l_s + h``); every segment must
    hold at least that many.
    """
    n = series if isinstance(series, int) else len(series)
    if min(_segment_lengths(n, split)) < segment_bars:
        raise DataError(
            f"series of {n} bars is too short: {segment_bars} bars per segment "
            f"need at least {minimum_length(split, segment_bars)} bars"
        )
    return split_rows(n, split)


def window_count(n: int, l_s: int, h: int, stride: int) -> int:
    return max(0, (n - l_s - h + 1 + stride - 1) // stride)


def make_windows(
    series: NormalizedSeries,
    l_s: int,
    l: int,
    h: int,
    stride: int = 1,
    start: int = 0,
    stop: Optional[int] = None,
    anchor_phase: Optional[int] = None,
) -> Iterator[SampleWindow]:
    """
    Sample windows whose rows all lie in ``[start, stop)``, anchors ascending.

    Anchor t sees signature rows ``t - l_s + 1 .. t`` and local rows
    ``t - l + 1 .. t + h - 1``; its targets are the raw bars ``t + 1 .. t + h``.
    With ``anchor_phase`` set, only anchors whose bar clock
    ``timestamp // frequency`` is congruent to it modulo ``stride`` are used;
    otherwise anchors step by ``stride`` from the first admissible one.
    Windows touching a row flagged invalid, or whose horizon trades no
    volume, are skipped.
    """
    if not (l_s >= l >= 1 and h >= 2 and stride >= 1):
        raise DataError(
            f"need l_s >= l >= 1, h >= 2, stride >= 1; got {l_s}, {l}, {h}, {stride}"
        )
    stop = len(series) if stop is None else stop

    invalid_prefix = np.concatenate([[0], np.cumsum(~series.valid)])
    first, last = start + l_s - 1, stop - h - 1
    if anchor_phase is None:
        anchors = range(first, last + 1, stride)
    else:
        clock = series.timestamps // series.frequency
        phase = anchor_phase % stride
        anchors = [t for t in range(first, last + 1) if clock[t] % stride == phase]

    bin_seconds = int(series.frequency)
    skipped = 0
    for t in anchors:
        lo, hi = t - l_s + 1, t + h + 1
        if invalid_prefix[hi] - invalid_prefix[lo] or series.volumes[t + 1 : hi].sum() <= 0:
            skipped += 1
            continue
        yield SampleWindow(
            asset_id=series.asset_id,
            anchor=t,
            signature_window=series.features[t - l_s + 1 : t + 1],
            local_window=series.features[t - l + 1 : t + h],
            target_prices=series.prices[t + 1 : t + h + 1],
            target_volumes=series.volumes[t + 1 : t + h + 1],
            bin_seconds=bin_seconds,
        )
    if skipped:
        logger.info(
            "%s: skipped %d windows (invalid rows or no horizon volume)",
            series.asset_id,
            skipped,
        )


def segment_windows(
    series: NormalizedSeries,
    ranges: SplitRanges,
    segment: str,
    l_s: int,
    l: int,
    h: int,
    stride: int = 1,
    anchor_phase: Optional[int] = None,
) -> List[SampleWindow]:
    start, stop = ranges.segment(segment)
    windows = list(make_windows(series, l_s, l, h, stride, start, stop, anchor_phase))
    for window in windows:
        assert start <= window.anchor - l_s + 1 and window.anchor + h < stop, (
            f"window {window.anchor} straddles {segment} [{start}, {stop})"
        )
    return windows
