import numpy as np
import pytest

from sigvwap.data_pipeline import (
    MarketProfile,
    load_series,
    make_windows,
    minimum_length,
    minmax_scale_volume,
    prepare_asset,
    resample_series,
    rolling_median,
    rolling_median_normalize,
    synthesize_market,
    synthesize_universe,
    temporal_split,
    window_count,
)
from sigvwap.errors import ConfigError, DataError, GapError
from sigvwap.model.market import AssetSeries, NormalizedSeries, SplitSpec

from conftest import prepared_universe, test_config

HOUR = 3600
START = 1_700_000_000 - 1_700_000_000 % HOUR


def _write_csv(path, rows, header="timestamp,close,volume"):
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return path


def _hourly_rows(volumes, prices=None, skip=()):
    prices = prices or [100.0 + i for i in range(len(volumes))]
    return [
        f"{START + i * HOUR},{price},{volume}"
        for i, (price, volume) in enumerate(zip(prices, volumes))
        if i not in skip
    ]


def _series(volumes, prices=None, asset_id="AAA"):
    n = len(volumes)
    return AssetSeries(
        asset_id=asset_id,
        timestamps=START + HOUR * np.arange(n),
        prices=prices if prices is not None else np.full(n, 100.0),
        volumes=volumes,
        frequency=HOUR,
    )


def _normalized(features, volumes=None):
    features = np.asarray(features, dtype=float).reshape(len(features), -1)
    n = len(features)
    return NormalizedSeries(
        asset_id="AAA",
        features=features,
        prices=100.0 + np.arange(n, dtype=float),
        volumes=np.ones(n) if volumes is None else np.asarray(volumes, dtype=float),
        timestamps=START + HOUR * np.arange(n),
        warmup_len=0,
        frequency=HOUR,
        feature_names=("volume",) if features.shape[1] == 1 else ("log_return", "volume"),
        valid=np.ones(n, dtype=bool),
    )


def test_load_series(tmp_path):
    path = _write_csv(tmp_path / "AAA.csv", _hourly_rows([10.0, 20.0, 30.0]))
    series = load_series(path)
    assert series.asset_id == "AAA"
    assert len(series) == 3
    assert series.frequency == HOUR
    assert series.volumes.tolist() == [10.0, 20.0, 30.0]
    assert not series.filled.any()


def test_load_series_with_schema_and_iso_timestamps(tmp_path):
    rows = [
        "2024-03-01T00:00:00Z;50.5;7",
        "2024-03-01T01:00:00Z;51.0;8",
    ]
    path = _write_csv(tmp_path / "x.txt", rows, header="time;px;qty")
    series = load_series(
        path, schema={"timestamp": "time", "price": "px", "volume": "qty"}, asset_id="BBB"
    )
    assert series.asset_id == "BBB"
    assert series.prices.tolist() == [50.5, 51.0]
    assert series.timestamps[1] - series.timestamps[0] == HOUR


def test_duplicate_timestamps_keep_the_last_row(tmp_path):
    rows = _hourly_rows([1.0, 2.0, 3.0])
    rows.insert(2, f"{START + HOUR},150.0,99.0")
    series = load_series(_write_csv(tmp_path / "dup.csv", rows))
    assert len(series) == 3
    assert series.volumes[1] == 99.0
    assert series.prices[1] == 150.0


def test_unsorted_rows_are_sorted(tmp_path):
    rows = _hourly_rows([1.0, 2.0, 3.0])
    series = load_series(_write_csv(tmp_path / "rev.csv", rows[::-1]))
    assert series.volumes.tolist() == [1.0, 2.0, 3.0]


def test_short_gaps_are_filled(tmp_path):
    rows = _hourly_rows([1.0, 2.0, 3.0, 4.0, 5.0], skip=(1, 2))
    series = load_series(_write_csv(tmp_path / "gap.csv", rows))
    assert len(series) == 5
    assert series.filled.tolist() == [False, True, True, False, False]
    assert series.volumes.tolist() == [1.0, 0.0, 0.0, 4.0, 5.0]
    assert series.prices[1] == series.prices[0] == series.prices[2]
    assert series.gap_report.filled_bars == 2


def test_long_gaps_raise_with_a_report(tmp_path):
    rows = _hourly_rows([1.0] * 10, skip=(2, 3, 4, 5))
    with pytest.raises(GapError) as info:
        load_series(_write_csv(tmp_path / "gap.csv", rows), gap_threshold=3)
    assert info.value.report.largest == 4


@pytest.mark.parametrize(
    "rows, message",
    [
        ([], "empty series"),
        ([f"{START},abc,1"], "malformed price"),
        ([f"{START},100,1", f"{START + HOUR},100,-1"], "volume >= 0"),
        ([f"{START},0,1"], "price must be > 0"),
    ],
)
def test_bad_rows(tmp_path, rows, message):
    with pytest.raises(DataError, match=message):
        load_series(_write_csv(tmp_path / "bad.csv", rows))


def test_malformed_value_reports_the_line(tmp_path):
    rows = _hourly_rows([1.0, 2.0])
    rows.append(f"{START + 2 * HOUR},101,oops")
    with pytest.raises(DataError, match=r"bad\.csv:4: malformed volume"):
        load_series(_write_csv(tmp_path / "bad.csv", rows))


def test_empty_and_missing_files(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(DataError):
        load_series(empty)
    with pytest.raises(DataError, match="no such file"):
        load_series(tmp_path / "absent.csv")


def test_missing_column(tmp_path):
    with pytest.raises(DataError, match="missing columns"):
        load_series(_write_csv(tmp_path / "c.csv", [f"{START},1"], header="timestamp,close"))


def test_resample():
    series = _series(np.array([1.0, 2.0, 3.0, 4.0, 5.0]), prices=np.arange(1.0, 6.0))
    coarse = resample_series(series, 2)
    assert coarse.frequency == 2 * HOUR
    assert coarse.volumes.tolist() == [3.0, 7.0]
    assert coarse.prices.tolist() == [2.0, 4.0]
    assert coarse.timestamps.tolist() == [START, START + 2 * HOUR]
    assert resample_series(series, 1) is series
    with pytest.raises(DataError):
        resample_series(series, 6)


def test_rolling_median_examples():
    # the median window ends at the bar itself when the shift is zero
    assert rolling_median(np.array([1.0, 2.0, 3.0, 4.0, 10.0]), 3, 0)[4] == 4.0
    normalized = rolling_median_normalize(_series(np.array([1.0, 2.0, 3.0, 4.0, 10.0])), 3, 0)
    assert normalized.features[-1, 1] == pytest.approx(2.5)

    normalized = rolling_median_normalize(_series(np.array([1.0, 1.0, 4.0, 4.0, 4.0, 8.0])), 2, 2)
    assert normalized.warmup_len == 4
    assert normalized.features[:, 1].tolist() == pytest.approx([1.6, 2.0])


def test_rolling_median_never_reads_ahead():
    values = np.random.default_rng(0).uniform(1.0, 2.0, size=30)
    reference = rolling_median(values, 5, 3)
    changed = values.copy()
    changed[20:] *= 100.0
    assert rolling_median(changed, 5, 3)[:23] == pytest.approx(reference[:23], nan_ok=True)


def test_constant_volume_normalizes_to_one():
    profile = MarketProfile(amplitude=0.0, volume_noise=0.0)
    series = synthesize_market(3, 60, profile)
    normalized = rolling_median_normalize(series, 10, 4)
    assert len(normalized) == 60 - 14
    assert normalized.features[:, 1] == pytest.approx(np.ones(46))


def test_zero_median_rows_are_excluded():
    normalized = rolling_median_normalize(_series(np.array([0.0, 0.0, 0.0, 5.0, 5.0, 5.0])), 2, 0)
    assert normalized.valid.tolist() == [False, True, True, True]
    assert np.all(np.isfinite(normalized.features))


def test_normalize_needs_more_than_the_warmup():
    with pytest.raises(DataError):
        rolling_median_normalize(_series(np.ones(5)), 3, 2)
    with pytest.raises(DataError, match="unknown features"):
        rolling_median_normalize(_series(np.ones(9)), 3, 2, features=("spread",))


def test_minmax_scale_uses_the_training_rows():
    scaled = minmax_scale_volume(_normalized([2.0, 4.0, 8.0]), SplitSpec())
    assert scaled.features[:, 0].tolist() == pytest.approx([0.5, 1.0, 2.0])
    assert scaled.volume_scale == 4.0


def test_minmax_scale_rejects_flat_volume():
    with pytest.raises(DataError, match="degenerate volume"):
        minmax_scale_volume(_normalized([0.0, 0.0, 0.0, 1.0]), SplitSpec())


def test_temporal_split():
    ranges = temporal_split(100, SplitSpec())
    assert ranges.lengths() == (64, 16, 20)
    assert ranges.train == (0, 64) and ranges.validation == (64, 80) and ranges.test == (80, 100)


@pytest.mark.parametrize("fractions", [(1.0, 0.2), (0.8, 0.0), (-0.1, 0.5)])
def test_split_fractions_are_validated(fractions):
    with pytest.raises(ConfigError):
        SplitSpec(*fractions)


def test_split_rejects_short_series():
    with pytest.raises(DataError, match="too short"):
        temporal_split(20, SplitSpec(), segment_bars=8)
    n = minimum_length(SplitSpec(), 8)
    assert min(temporal_split(n, SplitSpec(), 8).lengths()) >= 8
    with pytest.raises(DataError):
        temporal_split(n - 1, SplitSpec(), 8)


@pytest.mark.parametrize("stride", [1, 2, 5])
def test_window_counts_and_alignment(stride):
    n, l_s, l, h = 30, 6, 3, 4
    features = np.random.default_rng(stride).normal(size=(n, 2))
    series = _normalized(features, volumes=np.arange(1.0, n + 1))
    windows = list(make_windows(series, l_s, l, h, stride))
    assert len(windows) == window_count(n, l_s, h, stride)

    for window in windows:
        t = window.anchor
        assert window.signature_window.shape == (l_s, 2)
        assert window.local_window.shape == (l + h - 1, 2)
        assert np.array_equal(window.signature_window[-1], window.local_window[l - 1])
        assert np.array_equal(window.signature_window[-1], features[t])
        assert window.target_volumes.tolist() == list(np.arange(t + 2.0, t + h + 2.0))
        assert window.lookback == l


def test_windows_skip_invalid_rows_and_dead_horizons():
    n, l_s, l, h = 20, 4, 2, 3
    volumes = np.ones(n)
    volumes[10:13] = 0.0
    series = _normalized(np.zeros((n, 2)), volumes=volumes)
    series.valid[5] = False
    anchors = [w.anchor for w in make_windows(series, l_s, l, h)]
    # row 5 blocks anchors 3..8; anchor 9 trades nothing over bars 10..12
    assert anchors == list(range(10, 17))


def test_window_anchor_phase_follows_the_bar_clock():
    series = _normalized(np.zeros((40, 2)))
    clock = series.timestamps // series.frequency
    anchors = [w.anchor for w in make_windows(series, 4, 2, 3, stride=6, anchor_phase=1)]
    assert anchors
    assert all(clock[a] % 6 == 1 for a in anchors)


def test_windows_reject_bad_shapes():
    series = _normalized(np.zeros((20, 2)))
    with pytest.raises(DataError):
        list(make_windows(series, 2, 3, 3))
    with pytest.raises(DataError):
        list(make_windows(series, 4, 2, 1))


def test_prepared_fixture_splits_every_asset():
    for prepared in prepared_universe.values():
        train, validation, test = prepared.ranges.lengths()
        assert train > validation > 0 and test > 0
        assert prepared.series.volume_scale > 0


def test_prepare_asset_drops_the_warmup():
    series = synthesize_market(5, 200)
    normalized, ranges = prepare_asset(series, 12, 3, SplitSpec(), 10)
    assert normalized.warmup_len == 15
    assert ranges.test[1] == len(normalized) == 185


def test_synthetic_market_is_deterministic():
    a = synthesize_universe(11, ["A", "B"], 50)
    b = synthesize_universe(11, ["A", "B"], 50)
    c = synthesize_universe(12, ["A", "B"], 50)
    assert np.array_equal(a["A"].volumes, b["A"].volumes)
    assert np.array_equal(a["B"].prices, b["B"].prices)
    assert not np.array_equal(a["A"].volumes, a["B"].volumes)
    assert not np.array_equal(a["A"].volumes, c["A"].volumes)


def test_synthetic_prices_stay_in_band():
    profile = MarketProfile(price_volatility=0.2, log_price_bound=0.5)
    series = synthesize_market(0, 500, profile)
    assert np.abs(np.log(series.prices / profile.start_price)).max() <= 0.5 + 1e-12
    assert np.all(series.volumes > 0)


def test_synthetic_seasonality():
    profile = MarketProfile(period=24, volume_noise=0.0)
    series = synthesize_market(0, 48, profile)
    assert series.volumes[:24] == pytest.approx(series.volumes[24:])
    assert series.volumes.argmax() % 24 == 6


def test_synthetic_rejects_duplicate_ids():
    with pytest.raises(DataError):
        synthesize_universe(0, ["A", "A"], 10)


def test_test_config_fits_the_fixture_series():
    assert test_config.synthetic_bars >= minimum_length(
        test_config.split, test_config.signature_lookback + test_config.horizon
    )
