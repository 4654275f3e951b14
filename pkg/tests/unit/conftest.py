from dataclasses import replace
from pathlib import Path

import pytest

from sigvwap.config import ExperimentConfig, write_effective_config
from sigvwap.data_pipeline import synthesize_universe
from sigvwap.managers import write_prepared, write_raw
from sigvwap.nn_core.tensor import set_check_finite
from sigvwap.training import build_window_sets, prepare_universe

from tests.test_config import SYNTHETIC_ASSETS, SYNTHETIC_SEED, TEST_OVERRIDES

set_check_finite(True)

test_config = replace(ExperimentConfig(), **TEST_OVERRIDES).validate()

raw_universe = synthesize_universe(
    SYNTHETIC_SEED, list(SYNTHETIC_ASSETS), test_config.synthetic_bars
)
prepared_universe = prepare_universe(test_config, raw_universe)
window_sets = build_window_sets(test_config, prepared_universe)


def config_for(variant: str, **changes) -> ExperimentConfig:
    return replace(test_config, variant=variant, **changes).validate()


def write_data_dir(directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for asset_id, asset in prepared_universe.items():
        write_prepared(directory, asset)
        write_raw(directory, raw_universe[asset_id])
    write_effective_config(directory, test_config)
    return directory


@pytest.fixture
def data_dir(tmp_path) -> Path:
    return write_data_dir(tmp_path / "data")


@pytest.fixture
def config_file(tmp_path) -> Path:
    path = tmp_path / "test.conf"
    lines = []
    for key, value in TEST_OVERRIDES.items():
        text = ",".join(str(v) for v in value) if isinstance(value, tuple) else str(value)
        lines.append(f"{key} = {text}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
