"""
Training and evaluation of the execution variants.

Training minimises the mean absolute VWAP loss with Adam. The validation loss
of the untrained model is the epoch-0 baseline; the best validation snapshot
is restored at the end, the learning rate halves on plateaus and training
stops after ``early_stop_patience`` epochs without improvement.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from sigvwap.allocator import naive_allocation
from sigvwap.config import ExperimentConfig
from sigvwap.data_pipeline.loader import resample_series
from sigvwap.errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DivergenceError,
    ShapeError,
)
from sigvwap.evaluation.economics import oracle_allocation, window_losses
from sigvwap.evaluation.report import ReportTables, loss_frame, report_tables
from sigvwap.model.market import AssetSeries, SampleWindow
from sigvwap.model.record import Record
from sigvwap.nn_core.optim import Adam, PlateauSchedule
from sigvwap.nn_core.tensor import backward, recording
from sigvwap.training.datasets import WindowSets, build_window_sets, prepare_universe
from sigvwap.training.model import VwapModel, WindowBatch
from sigvwap.types import AssetId, EvalMode
from sigvwap.utils import atomic_write_text

logger = logging.getLogger(__name__)

EVAL_BATCH = 256


@dataclass
class TrainState(Record):
    epoch: int
    train_loss: float
    val_loss: float
    best_val_loss: float
    lr: float
    wait: int
    seed: int

    def validate(self) -> None:
        assert self.epoch >= 0 and self.wait >= 0, self.as_dict()
        assert self.best_val_loss <= self.val_loss or math.isnan(self.val_loss), self.as_dict()


@dataclass
class TrainResult:
    model: VwapModel
    history: List[TrainState] = field(default_factory=list)

    @property
    def best_val_loss(self) -> float:
        return self.history[-1].best_val_loss

    @property
    def epochs_run(self) -> int:
        return self.history[-1].epoch


def _batches(
    windows: Sequence[SampleWindow], order: np.ndarray, size: int, min_size: int
) -> Iterator[WindowBatch]:
    starts = list(range(0, len(order), size))
    # a trailing batch smaller than min_size joins the previous one
    if len(starts) > 1 and len(order) - starts[-1] < min_size:
        starts.pop()
    for idx, start in enumerate(starts):
        stop = starts[idx + 1] if idx + 1 < len(starts) else len(order)
        yield WindowBatch.stack([windows[i] for i in order[start:stop]])


def validation_loss(model: VwapModel, windows: Sequence[SampleWindow]) -> float:
    if not windows:
        raise DataError("no validation windows")
    total = 0.0
    for start in range(0, len(windows), EVAL_BATCH):
        batch = WindowBatch.stack(windows[start : start + EVAL_BATCH])
        total += model.loss(batch, mode="infer").item() * len(batch)
    return total / len(windows)


def train(
    config: ExperimentConfig,
    datasets: WindowSets,
    seed: Optional[int] = None,
    model: Optional[VwapModel] = None,
    lr_scale: float = 1.0,
) -> TrainResult:
    seed = config.seed if seed is None else seed
    model = model or VwapModel(config, seed)
    store = model.store
    if not datasets.train:
        raise DataError("no training windows")
    min_batch = 2 if model.signature is not None else 1
    if len(datasets.train) < min_batch:
        raise DataError(f"{len(datasets.train)} training windows, need {min_batch}")

    optimizer = Adam(
        lr=config.lr * lr_scale, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps
    )
    schedule = PlateauSchedule(patience=config.plateau_patience, min_lr=config.min_lr)
    best = validation_loss(model, datasets.validation)
    schedule.best = best
    best_snapshot = store.snapshot()
    history = [TrainState(0, math.nan, best, best, optimizer.lr, 0, seed)]
    wait = 0

    for epoch in range(1, config.epochs + 1):
        order = np.random.default_rng([seed, epoch]).permutation(len(datasets.train))
        loss_sum = 0.0
        for batch in _batches(datasets.train, order, config.batch_size, min_batch):
            with recording():
                loss = model.loss(batch, mode="train")
            if not np.isfinite(loss.item()):
                raise DivergenceError(
                    f"{config.variant} seed {seed}: non-finite training loss at epoch {epoch}"
                )
            backward(loss, store)
            optimizer.step(store)
            loss_sum += loss.item() * len(batch)
        train_loss = loss_sum / len(datasets.train)

        val_loss = validation_loss(model, datasets.validation)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"{config.variant} seed {seed}: non-finite validation loss")
        if val_loss < best:
            best, wait = val_loss, 0
            best_snapshot = store.snapshot()
        else:
            wait += 1
        schedule.update(optimizer, val_loss)
        history.append(TrainState(epoch, train_loss, val_loss, best, optimizer.lr, wait, seed))
        logger.info(
            "%s seed %d epoch %d: train %.6g, validation %.6g (best %.6g), lr %.3g",
            config.variant,
            seed,
            epoch,
            train_loss,
            val_loss,
            best,
            optimizer.lr,
        )
        if wait >= config.early_stop_patience:
            logger.info("Early stop after %d epochs without improvement", wait)
            break

    store.restore(best_snapshot)
    return TrainResult(model, history)


def history_frame(history: Sequence[TrainState]) -> pd.DataFrame:
    return pd.DataFrame.from_records([state.as_dict() for state in history])


def write_training_log(path: Path, history: Sequence[TrainState]) -> None:
    frame = history_frame(history)[["epoch", "train_loss", "val_loss", "lr"]]
    atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g"))


def evaluate(
    model: Optional[VwapModel],
    windows: Sequence[SampleWindow],
    mode: EvalMode = "model",
    subset: str = "test",
    batch_size: int = EVAL_BATCH,
    seed: Optional[int] = None,
) -> pd.DataFrame:
    """
    Per-window losses of ``mode`` ("model", "naive" or "oracle") against the
    naive uniform allocation, as a loss frame for :func:`report_tables`.
    """
    if mode == "model":
        if model is None:
            raise CheckpointError("evaluating a model needs trained parameters")
        curves = model.allocate(windows, batch_size)
    elif mode == "oracle":
        curves = [oracle_allocation(w) for w in windows]
    else:
        curves = [naive_allocation(w.horizon) for w in windows]

    variant = model.config.variant if model is not None else mode
    seed = seed if seed is not None else (model.seed if model is not None else 0)
    rows = []
    for window, curve in zip(windows, curves):
        ours, naive = window_losses(window, curve, naive_allocation(window.horizon))
        rows.append(
            {
                "variant": variant,
                "seed": seed,
                "subset": subset,
                "asset_id": window.asset_id,
                "anchor": window.anchor,
                "duration_s": window.horizon * window.bin_seconds,
                "model_signed": ours.signed,
                "model_abs": ours.absolute,
                "model_quad": ours.quadratic,
                "naive_signed": naive.signed,
                "naive_abs": naive.absolute,
                "naive_quad": naive.quadratic,
            }
        )
    return loss_frame(rows)


@dataclass
class ExperimentRun:
    config: ExperimentConfig
    seed: int
    results: Dict[AssetId, TrainResult]
    losses: pd.DataFrame


def run_experiment(config: ExperimentConfig, sets: WindowSets, seed: int) -> ExperimentRun:
    """
    Trains one variant for one seed and evaluates it on the train and test
    windows. Global variants train a single model and are also scored on the
    held-out assets; per-asset variants train one model per asset.
    """
    config = replace(config, seed=seed)
    if config.scope == "global":
        result = train(config, sets, seed)
        results = {"*": result}
        scored = [(result.model, sets)]
    else:
        assets = sorted({w.asset_id for w in sets.train})
        results = {asset: train(config, sets.only(asset), seed) for asset in assets}
        scored = [(r.model, sets.only(asset)) for asset, r in results.items()]

    frames = []
    for model, asset_sets in scored:
        for subset in ("train", "test", "holdout"):
            windows = asset_sets.segment(subset)
            if windows and not (subset == "holdout" and config.scope != "global"):
                frames.append(evaluate(model, windows, "model", subset))
    losses = pd.concat(frames, ignore_index=True) if frames else loss_frame([])
    return ExperimentRun(config, seed, results, losses)


def run_variant_matrix(
    configs: Sequence[ExperimentConfig],
    sets: WindowSets,
    seeds: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> Tuple[ReportTables, pd.DataFrame, List[ExperimentRun]]:
    """Every variant for every seed; the report averages the per-seed losses."""
    jobs = [(config, seed) for config in configs for seed in (seeds or config.seeds)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(run_experiment, config, sets, seed) for config, seed in jobs]
        runs = [future.result() for future in futures]
    losses = pd.concat([run.losses for run in runs], ignore_index=True)
    return report_tables(losses), losses, runs


def frequency_lr_scale(base_seconds: int, target_seconds: int) -> float:
    if base_seconds <= 0 or target_seconds <= 0:
        raise ConfigError([f"bin durations must be > 0, got {base_seconds}, {target_seconds}"])
    return math.sqrt(min(base_seconds, target_seconds) / max(base_seconds, target_seconds))


def finetune_from(
    base: VwapModel,
    config: ExperimentConfig,
    datasets: WindowSets,
    lr_scale: Optional[float] = None,
) -> TrainResult:
    """
    Warm-starts a model for ``config.frequency`` from ``base`` and trains it
    with the learning rate scaled by ``lr_scale`` (by default the
    frequency-ratio scale between the two bin durations).
    """
    model = VwapModel(config, base.seed)
    try:
        model.store.load_from(base.store)
    except ShapeError as exc:
        raise CheckpointError(f"cannot warm-start {config.variant}: {exc}") from exc
    if lr_scale is None:
        lr_scale = frequency_lr_scale(base.config.frequency, config.frequency)
    logger.info(
        "Fine-tuning %d s model from %d s with lr scale %.3g",
        config.frequency,
        base.config.frequency,
        lr_scale,
    )
    return train(config, datasets, base.seed, model=model, lr_scale=lr_scale)


def train_ladder(
    config: ExperimentConfig,
    raw: Mapping[AssetId, AssetSeries],
    factors: Sequence[int] = (1, 2, 4),
) -> Dict[int, TrainResult]:
    """
    Progressive training over a frequency ladder: the finest rung trains from
    scratch and every coarser rung fine-tunes from its nearest trained
    neighbour. Results are keyed by bin duration in seconds.
    """
    factors = sorted(set(factors))
    if not factors or factors[0] < 1:
        raise ConfigError([f"ladder factors must be >= 1, got {list(factors)}"])
    results: Dict[int, TrainResult] = {}
    previous: Optional[VwapModel] = None
    for factor in factors:
        rung_raw = {asset: resample_series(series, factor) for asset, series in raw.items()}
        frequency = next(iter(rung_raw.values())).frequency
        rung_config = replace(config, frequency=int(frequency))
        sets = build_window_sets(rung_config, prepare_universe(rung_config, rung_raw))
        if previous is None:
            result = train(rung_config, sets)
        else:
            result = finetune_from(previous, rung_config, sets)
        results[int(frequency)] = result
        previous = result.model
    return results


def variable_importance(model: VwapModel, windows: Sequence[SampleWindow]) -> pd.Series:
    """Mean variable-selection weight per input variable over ``windows``."""
    if model.config.backbone != "transformer":
        raise ConfigError([f"{model.config.variant} has no variable selection network"])
    if not windows:
        raise DataError("no windows to measure variable importance on")
    totals = np.zeros(len(model.variable_names))
    for start in range(0, len(windows), EVAL_BATCH):
        chunk = windows[start : start + EVAL_BATCH]
        model.context(WindowBatch.stack(chunk))
        weights = model.backbone.last_importance.numpy()
        totals += weights.reshape(-1, weights.shape[-1]).mean(axis=0) * len(chunk)
    return pd.Series(totals / len(windows), index=model.variable_names, name="importance")
