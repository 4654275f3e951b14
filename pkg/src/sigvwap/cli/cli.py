import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import click
import numpy as np
import pandas as pd

from sigvwap.allocator import REFINE_THRESHOLD_S, refine_allocation
from sigvwap.cli.helpers import (
    allocation_frame,
    checkpoint_prefix,
    dump_signatures,
    echo_table,
    load_model,
    pd_table,
    prepared_table,
    read_parent_allocation,
    save_result,
)
from sigvwap.config import (
    PROFILES,
    ExperimentConfig,
    load_config,
    variant_config,
    write_effective_config,
)
from sigvwap.data_pipeline import MarketProfile, load_series, synthesize_universe
from sigvwap.desk import ExecutionDesk
from sigvwap.errors import ConfigError, DataError, SigVwapError
from sigvwap.evaluation import format_table, read_losses, report_tables, write_losses, write_report
from sigvwap.managers import CheckpointManager, read_raw_universe, write_prepared, write_raw
from sigvwap.model.allocation import AllocationCurve
from sigvwap.model.market import AssetSeries
from sigvwap.training import (
    VwapModel,
    WindowSets,
    evaluate,
    prepare_universe,
    run_variant_matrix,
    train_ladder,
    variable_importance,
)
from sigvwap.types import VARIANTS, AssetId
from sigvwap.utils import atomic_write_bytes, atomic_write_text

logger = logging.getLogger(__name__)

SUBSETS = ("train", "validation", "test", "holdout")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@dataclass
class CliState:
    config: ExperimentConfig
    workers: int


class DeskGroup(click.Group):
    """
    Sets up logging before any subcommand runs, maps pipeline errors to exit
    code 1 and broken invariants to exit code 2.
    """

    @staticmethod
    def set_log_level(_ctx: click.Context, _param: click.Parameter, value: str) -> str:
        level = getattr(logging, value.upper())
        logging.basicConfig(level=level, format=LOG_FORMAT)
        logging.getLogger().setLevel(level)
        return value

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except SigVwapError as exc:
            click.secho(f"Error: {exc}", fg="red", err=True)
            ctx.exit(1)
        except AssertionError as exc:
            click.secho(f"Internal error: {exc}", fg="red", err=True)
            ctx.exit(2)
        except click.UsageError as exc:
            exc.show()
            ctx.exit(1)


@click.group(cls=DeskGroup)
@click.option(
    "--log-level",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    default="INFO",
    envvar="SIGVWAP_LOG_LEVEL",
    show_default=True,
    is_eager=True,
    expose_value=False,
    callback=DeskGroup.set_log_level,
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Flat key = value config file",
)
@click.option(
    "--profile",
    type=click.Choice(PROFILES),
    default="tiny",
    envvar="SIGVWAP_PROFILE",
    show_default=True,
    help="Default hyperparameters to start from",
)
@click.option("--seed", type=int, default=None, help="Run this seed only")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.pass_context
def cli(ctx, config_path, profile, seed, workers):
    """
    Signature-enhanced dynamic VWAP execution.

    Every config key can also be set as SIGVWAP_<KEY> in the environment.
    """

    overrides = {"seed": seed, "seeds": None if seed is None else (seed,)}
    config = load_config(profile, config_path, overrides=overrides)
    ctx.obj = CliState(config, workers)


def _out_dir(out: Path) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_inputs(config: ExperimentConfig, inputs: Tuple[Path, ...]) -> Dict[AssetId, AssetSeries]:
    raw: Dict[AssetId, AssetSeries] = {}
    for path in inputs:
        series = load_series(path, gap_threshold=config.gap_threshold)
        if series.asset_id in raw:
            raise DataError(f"{path}: asset {series.asset_id!r} given twice")
        if series.gap_report is not None and series.gap_report.filled_bars:
            click.secho(str(series.gap_report), fg="yellow")
        raw[series.asset_id] = series
    return raw


def _synthetic_inputs(config: ExperimentConfig) -> Dict[AssetId, AssetSeries]:
    profile = MarketProfile(
        amplitude=config.synthetic_amplitude,
        volume_noise=config.synthetic_noise,
        frequency=config.frequency,
    )
    asset_ids = [f"SYN{idx}" for idx in range(config.synthetic_assets)]
    return synthesize_universe(config.seed, asset_ids, config.synthetic_bars, profile)


@cli.command()
@click.argument(
    "inputs", nargs=-1, type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--synthetic", is_flag=True, help="Generate synthetic markets")
@click.option("--dump-signatures", "dump", is_flag=True, help="Write window signatures")
@click.pass_obj
def prepare(state: CliState, inputs, out, synthetic, dump):
    """
    Normalize and split bar series into a data directory
    """
    config = state.config
    if synthetic == bool(inputs):
        raise click.UsageError("pass either INPUTS or --synthetic")
    raw = _synthetic_inputs(config) if synthetic else _read_inputs(config, inputs)
    prepared = prepare_universe(config, raw)

    out = _out_dir(out)
    for asset_id, asset in prepared.items():
        write_prepared(out, asset)
        write_raw(out, raw[asset_id])
    if dump:
        dump_signatures(out, config, prepared)
    write_effective_config(out, config)
    echo_table("Prepared series", prepared_table(prepared))


def _parse_factors(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError([f"ladder must be comma-separated integers, got {text!r}"]) from exc


def _train_ladder(config: ExperimentConfig, data: Path, out: Path, factors: List[int]) -> None:
    results = train_ladder(config, read_raw_universe(data), factors)
    rows = []
    for seconds, result in results.items():
        save_result(out / f"{config.variant}.{seconds}s", result)
        rows.append(
            {
                "bin_seconds": seconds,
                "epochs": result.history[-1].epoch,
                "best_val_loss": result.history[-1].best_val_loss,
            }
        )
    write_effective_config(out, config)
    echo_table("Frequency ladder", pd.DataFrame.from_records(rows))


@cli.command()
@click.option(
    "--data", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path)
)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--variant", type=click.Choice(VARIANTS), default=None)
@click.option("--matrix", is_flag=True, help="Train every variant")
@click.option("--ladder", default=None, help="Resample factors of a frequency ladder, e.g. 1,2,4")
@click.pass_obj
def train(state: CliState, data, out, variant, matrix, ladder):
    """
    Train checkpoints and report their losses
    """
    config = state.config if variant is None else variant_config(variant, state.config)
    if matrix and ladder:
        raise click.UsageError("--matrix and --ladder cannot be combined")
    out = _out_dir(out)
    if ladder:
        _train_ladder(config, data, out, _parse_factors(ladder))
        return

    desk = ExecutionDesk(data)
    logger.debug("Series:\n%s", pd_table(desk.series_manager).to_string(index=False))
    sets = desk.window_sets(config)
    configs = [variant_config(name, config) for name in VARIANTS] if matrix else [config]
    tables, losses, runs = run_variant_matrix(configs, sets, config.seeds, state.workers)

    for run in runs:
        for key, result in run.results.items():
            asset_id = None if key == "*" else key
            prefix = checkpoint_prefix(out, run.config.variant, run.seed, asset_id)
            save_result(prefix, result, asset_id)
    write_losses(out / "losses.csv", losses)
    write_report(out, tables)
    write_effective_config(out, config)
    echo_table("Pooled", format_table(tables.pooled))


def _model_windows(
    config: ExperimentConfig, data: Path, model: Optional[VwapModel], subset: str
) -> WindowSets:
    sets = ExecutionDesk(data).window_sets(config)
    asset_id = model.store.metadata.get("asset_id") if model is not None else None
    sets = sets if asset_id is None else sets.only(asset_id)
    if not sets.segment(subset):
        raise DataError(f"no {subset} windows in {data}")
    return sets


@cli.command("evaluate")
@click.option(
    "--data", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path)
)
@click.option("--checkpoint", type=click.Path(path_type=Path), help="Checkpoint prefix")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option(
    "--mode", type=click.Choice(["model", "naive", "oracle"]), default="model", show_default=True
)
@click.option("--subset", type=click.Choice(SUBSETS), default="test", show_default=True)
@click.option("--importance", is_flag=True, help="Also write mean variable-selection weights")
@click.pass_obj
def evaluate_command(state: CliState, data, checkpoint, out, mode, subset, importance):
    """
    Score a checkpoint, or a baseline, on prepared windows
    """
    config = state.config
    model = None
    if mode == "model" or importance:
        model = load_model(config, checkpoint)
        config = model.config
    windows = _model_windows(config, data, model, subset).segment(subset)

    losses = evaluate(model if mode == "model" else None, windows, mode, subset, seed=config.seed)
    tables = report_tables(losses)
    importances = variable_importance(model, windows) if importance and model else None

    out = _out_dir(out)
    write_losses(out / "losses.csv", losses)
    write_report(out, tables)
    if importances is not None:
        text = importances.rename_axis("variable").reset_index().to_csv(
            index=False, float_format="%.17g"
        )
        atomic_write_text(out / "importance.csv", text)
        echo_table("Variable importance", importances.rename_axis("variable").reset_index())
    write_effective_config(out, config)
    echo_table("Pooled", format_table(tables.pooled))


@cli.command()
@click.option(
    "--losses",
    "losses_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.pass_obj
def report(state: CliState, losses_path, out):
    """
    Rebuild the report tables from stored per-window losses
    """
    tables = report_tables(read_losses(losses_path))
    out = _out_dir(out)
    write_report(out, tables)
    write_effective_config(out, state.config)
    echo_table("Pooled", format_table(tables.pooled))


@cli.command()
@click.option(
    "--data", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path)
)
@click.option("--checkpoint", type=click.Path(path_type=Path), help="Checkpoint prefix")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--subset", type=click.Choice(SUBSETS), default="test", show_default=True)
@click.pass_obj
def backtest(state: CliState, data, checkpoint, out, subset):
    """
    Replay a checkpoint: allocation curves, losses and the order-duration report
    """
    model = load_model(state.config, checkpoint)
    windows = _model_windows(model.config, data, model, subset).segment(subset)
    allocations = allocation_frame(windows, model.allocate(windows))
    losses = evaluate(model, windows, "model", subset)
    tables = report_tables(losses, durations=True)

    out = _out_dir(out)
    atomic_write_text(
        out / "allocations.csv", allocations.to_csv(index=False, float_format="%.17g")
    )
    write_losses(out / "losses.csv", losses)
    write_report(out, tables)
    write_effective_config(out, model.config)
    echo_table("Order duration", format_table(tables.durations))


@cli.command()
@click.option(
    "--parent",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Allocation with a weight column, one row per parent bin",
)
@click.option("--bin-seconds", required=True, type=click.IntRange(min=1))
@click.option(
    "--ladder",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    default=None,
    help="Directory of frequency-ladder checkpoints",
)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option(
    "--threshold", type=click.IntRange(min=1), default=REFINE_THRESHOLD_S, show_default=True
)
@click.pass_obj
def refine(state: CliState, parent, bin_seconds, ladder, out, threshold):
    """
    Split parent bins longer than the threshold with the ladder's sub-allocators
    """
    parent_curve = AllocationCurve(read_parent_allocation(parent))
    target = Path(out) / "refined_allocation.csv"
    if bin_seconds <= threshold:
        _out_dir(out)
        atomic_write_bytes(target, Path(parent).read_bytes())
        write_effective_config(out, state.config)
        click.echo(f"{parent}: bins already at most {threshold} s, copied unchanged")
        return
    if ladder is None:
        raise ConfigError([f"{bin_seconds} s bins need --ladder checkpoints to refine"])

    manager = CheckpointManager()
    manager.load(ladder)
    refined = refine_allocation(parent_curve, bin_seconds, manager.sub_allocators(), threshold)
    frame = pd.DataFrame(
        {
            "leaf": np.arange(1, len(refined.curve) + 1),
            "parent_bin": refined.parent_index + 1,
            "bin_seconds": refined.bin_seconds,
            "weight": refined.curve.weights,
        }
    )
    total = float(refined.curve.weights.sum())
    footer = (
        f"# conservation: sum = {total:.17g}, leaves = {len(frame)}, "
        f"parent bins = {len(parent_curve)}\n"
    )
    _out_dir(out)
    atomic_write_text(target, frame.to_csv(index=False, float_format="%.17g") + footer)
    write_effective_config(out, state.config)
    echo_table("Refined allocation", frame)


def main():
    cli()  # pylint: disable=no-value-for-parameter


if __name__ == "__main__":
    main()
