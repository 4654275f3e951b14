import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional

import click
import numpy as np
import pandas as pd

from sigvwap.config import ExperimentConfig, variant_config
from sigvwap.data_pipeline.windows import make_windows
from sigvwap.errors import CheckpointError, DataError
from sigvwap.managers.record_manager import RecordManager
from sigvwap.nn_core.parameter_store import ParameterStore
from sigvwap.signature.tensor_algebra import truncated_signature
from sigvwap.training.datasets import PreparedAsset
from sigvwap.training.model import VwapModel
from sigvwap.training.trainer import TrainResult, write_training_log
from sigvwap.types import AssetId
from sigvwap.utils import atomic_write_text

logger = logging.getLogger(__name__)


def checkpoint_prefix(
    out_dir: Path, variant: str, seed: int, asset_id: Optional[AssetId] = None
) -> Path:
    name = f"{variant}.seed{seed}" if asset_id is None else f"{variant}.{asset_id}.seed{seed}"
    return Path(out_dir) / name


def save_result(prefix: Path, result: TrainResult, asset_id: Optional[AssetId] = None) -> Path:
    if asset_id is not None:
        result.model.store.metadata["asset_id"] = asset_id
    result.model.store.save(prefix)
    write_training_log(prefix.with_name(prefix.name + ".log.csv"), result.history)
    logger.info("Saved checkpoint %s", prefix)
    return prefix


def load_model(config: ExperimentConfig, checkpoint: Optional[Path]) -> VwapModel:
    if checkpoint is None:
        raise CheckpointError("no checkpoint given: pass --checkpoint PREFIX from `sigvwap train`")
    store = ParameterStore.load(Path(checkpoint))
    variant = store.metadata.get("variant", config.variant)
    if variant != config.variant:
        config = variant_config(variant, config)
    return VwapModel.from_store(config, store)


def pd_table(manager: RecordManager) -> pd.DataFrame:
    return pd.DataFrame.from_records(
        [{"key": key, **_summary(record)} for key, record in manager.records().items()]
    )


def _summary(record) -> Dict[str, object]:
    if isinstance(record, PreparedAsset):
        train, validation, test = record.ranges.lengths()
        return {
            "bars": len(record.series),
            "warmup": record.series.warmup_len,
            "train": train,
            "validation": validation,
            "test": test,
            "invalid": int((~record.series.valid).sum()),
        }
    return {"record": repr(record)}


def prepared_table(prepared: Mapping[AssetId, PreparedAsset]) -> pd.DataFrame:
    return pd.DataFrame.from_records(
        [{"asset_id": asset_id, **_summary(asset)} for asset_id, asset in prepared.items()]
    )


def dump_signatures(
    out_dir: Path, config: ExperimentConfig, prepared: Mapping[AssetId, PreparedAsset]
) -> List[Path]:
    """Depth-k signatures of every unscaled signature window, one file per asset."""
    written = []
    for asset_id, asset in prepared.items():
        rows = []
        for window in make_windows(
            asset.series,
            config.signature_lookback,
            config.lookback,
            config.horizon,
            config.eval_stride,
        ):
            signature = truncated_signature(window.signature_window, config.signature_depth)
            rows.append([window.anchor, *signature.coefficients])
        columns = ["anchor"]
        if rows:
            columns += [f"sig_{idx}" for idx in range(len(rows[0]) - 1)]
        frame = pd.DataFrame(rows, columns=columns)
        path = Path(out_dir) / f"{asset_id}.signatures.csv"
        atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g"))
        logger.debug("Wrote %d signatures to %s", len(frame), path)
        written.append(path)
    return written


def allocation_frame(windows, curves) -> pd.DataFrame:
    records = [
        {"asset_id": w.asset_id, "anchor": w.anchor, "bin": idx + 1, "weight": weight}
        for w, curve in zip(windows, curves)
        for idx, weight in enumerate(curve.weights)
    ]
    return pd.DataFrame.from_records(records, columns=["asset_id", "anchor", "bin", "weight"])


def read_parent_allocation(path: Path) -> np.ndarray:
    frame = pd.read_csv(path, comment="#")
    if "weight" not in frame.columns:
        raise DataError(f"{path}: needs a 'weight' column")
    return frame["weight"].to_numpy(dtype=np.float64)


def echo_table(title: str, frame: pd.DataFrame) -> None:
    click.secho(title, bold=True)
    click.echo(frame.to_string(index=False))
