import math

import pandas as pd
import pytest

from sigvwap.errors import DataError
from sigvwap.evaluation import (
    format_table,
    loss_frame,
    read_losses,
    render_text,
    report_tables,
    write_losses,
    write_report,
)
from sigvwap.evaluation.report import POOLED_COLUMNS, format_duration

from tests.test_config import GOLDEN_LOSSES, GOLDEN_POOLED_CSV


def _row(
    model,
    naive,
    anchor=0,
    variant="GFT-Sig",
    seed=0,
    subset="test",
    asset_id="AAA",
    duration_s=10800,
):
    return {
        "variant": variant,
        "seed": seed,
        "subset": subset,
        "asset_id": asset_id,
        "anchor": anchor,
        "duration_s": duration_s,
        "model_signed": model,
        "model_abs": abs(model),
        "model_quad": model * model,
        "naive_signed": naive,
        "naive_abs": abs(naive),
        "naive_quad": naive * naive,
    }


def _golden_frame():
    return loss_frame(_row(model, naive, anchor) for anchor, model, naive in GOLDEN_LOSSES)


def test_golden_pooled_file(tmp_path):
    written = write_report(tmp_path, report_tables(_golden_frame()))
    names = [path.name for path in written]
    assert names == ["report_pooled.csv", "report_assets.csv", "report.txt"]
    assert (tmp_path / "report_pooled.csv").read_text(encoding="utf-8") == GOLDEN_POOLED_CSV


def test_single_asset_single_variant():
    tables = report_tables(_golden_frame())
    assert len(tables.pooled) == 1
    assert len(tables.per_asset) == 1
    assert tables.durations is None
    assert list(tables.pooled.columns) == POOLED_COLUMNS
    assert tables.per_asset.loc[0, "improvement_quad_pct"] == pytest.approx(75.0)


def test_negative_improvement_keeps_its_sign():
    tables = report_tables(loss_frame([_row(0.004, 0.001), _row(0.002, -0.001, anchor=1)]))
    formatted = format_table(tables.pooled)
    assert formatted.loc[0, "improvement_abs_pct"] == "-200.00"
    assert formatted.loc[0, "improvement_quad_pct"].startswith("-")


def test_zero_baseline_renders_not_available():
    tables = report_tables(loss_frame([_row(0.001, 0.0)]))
    assert math.isnan(tables.pooled.loc[0, "improvement_abs_pct"])
    assert format_table(tables.pooled).loc[0, "improvement_abs_pct"] == "n/a"


def test_seed_means_are_averaged():
    rows = [
        _row(0.001, 0.002, anchor=0, seed=0),
        _row(0.003, 0.002, anchor=0, seed=1),
        _row(0.003, 0.002, anchor=1, seed=1),
    ]
    pooled = report_tables(loss_frame(rows)).pooled
    # seed 0 mean 10 bp, seed 1 mean 30 bp
    assert pooled.loc[0, "model_abs_bp"] == pytest.approx(20.0)
    assert pooled.loc[0, "seeds"] == 2
    assert pooled.loc[0, "samples"] == 2


def test_sample_and_asset_weighted_improvements():
    rows = [_row(0.001, 0.002, anchor=a, asset_id="AAA") for a in range(3)]
    rows.append(_row(0.004, 0.002, anchor=0, asset_id="BBB"))
    tables = report_tables(loss_frame(rows))
    pooled = tables.pooled.loc[0]
    # samples: 17.5 bp vs 20 bp; assets: mean(10, 40) = 25 bp vs 20 bp
    assert pooled["improvement_abs_pct"] == pytest.approx(12.5)
    assert pooled["asset_improvement_abs_pct"] == pytest.approx(-25.0)
    assert tables.per_asset["asset_id"].tolist() == ["AAA", "BBB"]
    assert tables.per_asset["improvement_abs_pct"].tolist() == pytest.approx([50.0, -100.0])


def test_rows_follow_variant_and_subset_order():
    rows = [
        _row(0.001, 0.002, variant="GFT-Sig", subset="test"),
        _row(0.001, 0.002, variant="AFD", subset="test"),
        _row(0.001, 0.002, variant="GFT-Sig", subset="train"),
    ]
    pooled = report_tables(loss_frame(rows)).pooled
    assert list(zip(pooled["variant"], pooled["subset"])) == [
        ("AFD", "test"),
        ("GFT-Sig", "train"),
        ("GFT-Sig", "test"),
    ]


def test_duration_breakdown():
    rows = [
        _row(0.001, 0.002, anchor=0, duration_s=3600),
        _row(0.002, 0.002, anchor=0, duration_s=86400),
    ]
    tables = report_tables(loss_frame(rows))
    assert tables.durations["duration"].tolist() == ["1h", "1d"]
    assert tables.durations["twap_abs_bp"].tolist() == pytest.approx([20.0, 20.0])
    assert report_tables(loss_frame(rows[:1]), durations=True).durations is not None


@pytest.mark.parametrize(
    "seconds, label", [(3600, "1h"), (10800, "3h"), (86400, "1d"), (1800, "30m"), (90, "90s")]
)
def test_format_duration(seconds, label):
    assert format_duration(seconds) == label


def test_render_text_sections():
    rows = [_row(0.001, 0.002, duration_s=3600), _row(0.001, 0.002, duration_s=7200)]
    text = render_text(report_tables(loss_frame(rows)))
    assert text.startswith("# aggregation: ratio of means")
    for title in ("Pooled", "Per asset", "Order duration"):
        assert f"\n\n{title}\n" in text
    assert "+50.00" in text


def test_losses_round_trip(tmp_path):
    frame = _golden_frame()
    write_losses(tmp_path / "losses.csv", frame)
    loaded = read_losses(tmp_path / "losses.csv")
    pd.testing.assert_frame_equal(loaded, frame, check_dtype=False)


def test_read_losses_errors(tmp_path):
    with pytest.raises(DataError, match="no stored losses"):
        read_losses(tmp_path / "absent.csv")
    (tmp_path / "partial.csv").write_text("variant,seed\nGFT,0\n", encoding="utf-8")
    with pytest.raises(DataError, match="missing loss columns"):
        read_losses(tmp_path / "partial.csv")


def test_empty_report_is_an_error():
    with pytest.raises(DataError):
        report_tables(loss_frame([]))
