"""
Report tables built from stored per-sample losses.

Every aggregate is a ratio of means: losses are averaged per seed, the seed
means are averaged, and improvements versus naive are computed from those
averages. Pooled rows carry both the sample-weighted and the asset-weighted
improvement. The column layout is documented in ``docs/report_format.md``.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import pandas as pd

from sigvwap.errors import DataError
from sigvwap.model.execution import BASIS_POINT, MILLIONTH
from sigvwap.types import VARIANTS
from sigvwap.utils import atomic_write_text

logger = logging.getLogger(__name__)

LOSS_COLUMNS = [
    "variant",
    "seed",
    "subset",
    "asset_id",
    "anchor",
    "duration_s",
    "model_signed",
    "model_abs",
    "model_quad",
    "naive_signed",
    "naive_abs",
    "naive_quad",
]
LOSS_VALUES = ["model_abs", "model_quad", "naive_abs", "naive_quad"]
SUBSET_ORDER = ["train", "validation", "test", "holdout"]

POOLED_COLUMNS = [
    "variant",
    "subset",
    "seeds",
    "assets",
    "samples",
    "model_abs_bp",
    "naive_abs_bp",
    "improvement_abs_pct",
    "model_quad_millionths",
    "naive_quad_millionths",
    "improvement_quad_pct",
    "asset_improvement_abs_pct",
    "asset_improvement_quad_pct",
]
ASSET_COLUMNS = [
    "variant",
    "subset",
    "asset_id",
    "samples",
    "model_abs_bp",
    "naive_abs_bp",
    "improvement_abs_pct",
    "model_quad_millionths",
    "naive_quad_millionths",
    "improvement_quad_pct",
]
DURATION_COLUMNS = [
    "variant",
    "subset",
    "duration",
    "samples",
    "model_abs_bp",
    "twap_abs_bp",
    "improvement_abs_pct",
    "model_quad_millionths",
    "twap_quad_millionths",
    "improvement_quad_pct",
]

METADATA = {
    "aggregation": "ratio of means; per-seed means averaged over seeds",
    "price": "bar close",
    "units": "abs in basis points (1e-4), quad in millionths (1e-6), improvements in percent",
    "baseline": "naive uniform 1/h allocation (TWAP)",
}


@dataclass
class ReportTables:
    pooled: pd.DataFrame
    per_asset: pd.DataFrame
    durations: Optional[pd.DataFrame] = None
    metadata: Dict[str, str] = field(default_factory=lambda: dict(METADATA))


def loss_frame(rows: Iterable[dict]) -> pd.DataFrame:
    frame = pd.DataFrame.from_records(list(rows), columns=LOSS_COLUMNS)
    return frame.astype({"seed": int, "anchor": int, "duration_s": int})


def read_losses(path: Path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no stored losses")
    frame = pd.read_csv(path, dtype={"variant": str, "subset": str, "asset_id": str})
    missing = [col for col in LOSS_COLUMNS if col not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing loss columns {missing}")
    return frame[LOSS_COLUMNS]


def write_losses(path: Path, frame: pd.DataFrame) -> None:
    atomic_write_text(path, frame[LOSS_COLUMNS].to_csv(index=False, float_format="%.17g"))


def format_duration(seconds: int) -> str:
    for unit, size in (("d", 86400), ("h", 3600), ("m", 60)):
        if seconds % size == 0:
            return f"{seconds // size}{unit}"
    return f"{seconds}s"


def _improvement(model: float, baseline: float) -> float:
    if baseline == 0:
        return math.nan
    return 100.0 * (1.0 - model / baseline)


def _seed_means(group: pd.DataFrame, by: List[str]) -> pd.Series:
    per_seed = group.groupby(["seed", *by])[LOSS_VALUES].mean()
    if by:
        per_seed = per_seed.groupby(level="seed").mean()
    return per_seed.mean()


def _distinct_samples(group: pd.DataFrame) -> int:
    return len(group.drop_duplicates(["asset_id", "anchor", "duration_s"]))


def _loss_row(group: pd.DataFrame, naive: str = "naive") -> dict:
    means = _seed_means(group, [])
    return {
        "samples": _distinct_samples(group),
        "model_abs_bp": means["model_abs"] / BASIS_POINT,
        f"{naive}_abs_bp": means["naive_abs"] / BASIS_POINT,
        "improvement_abs_pct": _improvement(means["model_abs"], means["naive_abs"]),
        "model_quad_millionths": means["model_quad"] / MILLIONTH,
        f"{naive}_quad_millionths": means["naive_quad"] / MILLIONTH,
        "improvement_quad_pct": _improvement(means["model_quad"], means["naive_quad"]),
    }


def _ordered(frame: pd.DataFrame) -> pd.DataFrame:
    variants = [v for v in VARIANTS if v in set(frame["variant"])]
    variants += sorted(set(frame["variant"]) - set(variants))
    subsets = [s for s in SUBSET_ORDER if s in set(frame["subset"])]
    subsets += sorted(set(frame["subset"]) - set(subsets))
    keyed = frame.assign(
        _variant=pd.Categorical(frame["variant"], categories=variants, ordered=True),
        _subset=pd.Categorical(frame["subset"], categories=subsets, ordered=True),
    )
    keyed = keyed.sort_values(["_variant", "_subset", "asset_id", "duration_s", "anchor"])
    return keyed.drop(columns=["_variant", "_subset"])


def pooled_table(frame: pd.DataFrame) -> pd.DataFrame:
    rows = []
    for (variant, subset), group in frame.groupby(["variant", "subset"], sort=False):
        assets = _seed_means(group, ["asset_id"])
        rows.append(
            {
                "variant": variant,
                "subset": subset,
                "seeds": group["seed"].nunique(),
                "assets": group["asset_id"].nunique(),
                **_loss_row(group),
                "asset_improvement_abs_pct": _improvement(
                    assets["model_abs"], assets["naive_abs"]
                ),
                "asset_improvement_quad_pct": _improvement(
                    assets["model_quad"], assets["naive_quad"]
                ),
            }
        )
    return pd.DataFrame.from_records(rows, columns=POOLED_COLUMNS)


def asset_table(frame: pd.DataFrame) -> pd.DataFrame:
    rows = [
        {"variant": variant, "subset": subset, "asset_id": asset_id, **_loss_row(group)}
        for (variant, subset, asset_id), group in frame.groupby(
            ["variant", "subset", "asset_id"], sort=False
        )
    ]
    return pd.DataFrame.from_records(rows, columns=ASSET_COLUMNS)


def duration_table(frame: pd.DataFrame) -> pd.DataFrame:
    rows = [
        {
            "variant": variant,
            "subset": subset,
            "duration": format_duration(int(duration)),
            **_loss_row(group, naive="twap"),
        }
        for (variant, subset, duration), group in frame.groupby(
            ["variant", "subset", "duration_s"], sort=False
        )
    ]
    return pd.DataFrame.from_records(rows, columns=DURATION_COLUMNS)


def report_tables(losses: pd.DataFrame, durations: Optional[bool] = None) -> ReportTables:
    """
    Pooled rows per variant and subset, per-asset rows, and the order-duration
    breakdown. ``durations=None`` emits the breakdown only when the stored
    losses span more than one order duration.
    """
    if losses.empty:
        raise DataError("no losses to report")
    frame = _ordered(losses)
    if durations is None:
        durations = frame["duration_s"].nunique() > 1
    tables = ReportTables(
        pooled=pooled_table(frame),
        per_asset=asset_table(frame),
        durations=duration_table(frame) if durations else None,
    )
    logger.info(
        "Report: %d pooled rows, %d per-asset rows", len(tables.pooled), len(tables.per_asset)
    )
    return tables


def _format_value(column: str, value) -> str:
    if column.endswith(("_bp", "_millionths", "_pct")):
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return "n/a"
        return f"{value:+.2f}" if column.endswith("_pct") else f"{value:.2f}"
    return str(value)


def format_table(table: pd.DataFrame) -> pd.DataFrame:
    return pd.DataFrame(
        {column: [_format_value(column, v) for v in table[column]] for column in table.columns},
        columns=list(table.columns),
    )


def render_text(tables: ReportTables) -> str:
    sections = ["# " + "\n# ".join(f"{k}: {v}" for k, v in tables.metadata.items())]
    named = [("Pooled", tables.pooled), ("Per asset", tables.per_asset)]
    if tables.durations is not None:
        named.append(("Order duration", tables.durations))
    for title, table in named:
        sections.append(f"{title}\n{format_table(table).to_string(index=False)}")
    return "\n\n".join(sections) + "\n"


def write_report(out_dir: Path, tables: ReportTables, prefix: str = "report") -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    named = {"pooled": tables.pooled, "assets": tables.per_asset}
    if tables.durations is not None:
        named["durations"] = tables.durations
    for name, table in named.items():
        path = out_dir / f"{prefix}_{name}.csv"
        atomic_write_text(path, format_table(table).to_csv(index=False))
        written.append(path)
    text_path = out_dir / f"{prefix}.txt"
    atomic_write_text(text_path, render_text(tables))
    written.append(text_path)
    return written
