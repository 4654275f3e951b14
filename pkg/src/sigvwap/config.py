"""
Experiment configuration.

Values are resolved in order: profile defaults, a flat ``key = value`` file,
``SIGVWAP_<KEY>`` environment variables, then explicit overrides from the
command line. Every problem found along the way is collected and raised as a
single :class:`ConfigError`.
"""

import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, get_type_hints

from sigvwap.backbone.temporal import BackboneShape
from sigvwap.data_pipeline.normalize import FEATURES
from sigvwap.errors import ConfigError
from sigvwap.model.market import SplitSpec
from sigvwap.types import VARIANTS, Backbone, Scope
from sigvwap.utils import read_key_values, write_key_values

logger = logging.getLogger(__name__)

ENV_PREFIX = "SIGVWAP_"
PROFILES = ("tiny", "full")
DEFAULT_SEEDS = (0, 1, 2)


@dataclass(frozen=True)
class ExperimentConfig:
    variant: str = "GFT-Sig"
    profile: str = "tiny"
    seed: int = 0
    seeds: Tuple[int, ...] = DEFAULT_SEEDS

    # windows
    lookback: int = 24
    signature_lookback: int = 48
    horizon: int = 12
    stride: int = 1
    eval_stride: int = 1
    anchor_phase: Optional[int] = None

    # model
    d_model: int = 30
    signature_depth: int = 3
    num_heads: int = 3
    embedding: int = 3
    stack_depth: int = 2
    num_sublayers: int = 2
    kan_width: int = 8
    grid_intervals: int = 8
    adjuster_hidden: Tuple[int, ...] = (16, 8)

    # optimisation
    batch_size: int = 64
    epochs: int = 20
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-7
    plateau_patience: int = 5
    early_stop_patience: int = 10
    min_lr: float = 1e-6

    # data
    features: Tuple[str, ...] = ("log_return", "volume")
    window_bars: int = 48
    shift_bars: Optional[int] = None
    train_fraction: float = 0.8
    validation_fraction: float = 0.2
    gap_threshold: int = 6
    frequency: int = 3600
    holdout_assets: Tuple[str, ...] = ()

    # synthetic markets for `prepare --synthetic`
    synthetic_assets: int = 1
    synthetic_bars: int = 2400
    synthetic_amplitude: float = 1.0
    synthetic_noise: float = 0.3

    @property
    def backbone(self) -> Backbone:
        return "recurrent" if self.variant in ("AFD", "GFD") else "transformer"

    @property
    def use_signature(self) -> bool:
        return self.variant == "GFT-Sig"

    @property
    def scope(self) -> Scope:
        return "per-asset" if self.variant == "AFD" else "global"

    @property
    def shift(self) -> int:
        return self.horizon if self.shift_bars is None else self.shift_bars

    @property
    def segment_bars(self) -> int:
        return self.signature_lookback + self.horizon

    @property
    def split(self) -> SplitSpec:
        return SplitSpec(self.train_fraction, self.validation_fraction)

    def backbone_shape(self) -> BackboneShape:
        return BackboneShape(
            num_variables=len(self.features),
            d_model=self.d_model,
            embedding=self.embedding,
            num_heads=self.num_heads,
            stack_depth=self.stack_depth,
            num_sublayers=self.num_sublayers,
            kan_width=self.kan_width,
            grid_intervals=self.grid_intervals,
        )

    def problems(self) -> List[str]:
        problems = []
        if self.variant not in VARIANTS:
            problems.append(f"variant must be one of {list(VARIANTS)}, got {self.variant!r}")
        if self.profile not in PROFILES:
            problems.append(f"profile must be one of {list(PROFILES)}, got {self.profile!r}")
        if not self.signature_lookback >= self.lookback >= 1:
            problems.append(
                f"need signature_lookback >= lookback >= 1, got "
                f"{self.signature_lookback}, {self.lookback}"
            )
        if self.horizon < 2:
            problems.append(f"horizon must be >= 2, got {self.horizon}")
        for name in ("stride", "eval_stride", "d_model", "signature_depth", "num_heads"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("embedding", "stack_depth", "num_sublayers", "kan_width"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.grid_intervals < 4:
            problems.append(
                f"grid_intervals must be >= 4 for cubic splines, got {self.grid_intervals}"
            )
        if self.backbone == "transformer" and self.num_heads >= 1:
            if self.d_model % self.num_heads:
                problems.append(
                    f"d_model {self.d_model} is not divisible by num_heads {self.num_heads}"
                )
        if not self.adjuster_hidden or min(self.adjuster_hidden) < 1:
            problems.append(f"adjuster_hidden needs positive widths, got {self.adjuster_hidden}")
        min_batch = 2 if self.use_signature else 1
        if self.batch_size < min_batch:
            problems.append(f"batch_size must be >= {min_batch}, got {self.batch_size}")
        if self.epochs < 0:
            problems.append(f"epochs must be >= 0, got {self.epochs}")
        if self.lr < 0 or self.min_lr < 0:
            problems.append(f"learning rates must be >= 0, got {self.lr}, {self.min_lr}")
        for name in ("beta1", "beta2", "train_fraction", "validation_fraction"):
            if not 0.0 < getattr(self, name) < 1.0:
                problems.append(f"{name} must lie in (0, 1), got {getattr(self, name)}")
        if self.adam_eps <= 0:
            problems.append(f"adam_eps must be > 0, got {self.adam_eps}")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            problems.append("plateau_patience and early_stop_patience must be >= 1")
        if not self.seeds:
            problems.append("seeds must not be empty")
        unknown = [name for name in self.features if name not in FEATURES]
        if not self.features or unknown:
            problems.append(f"features must be drawn from {sorted(FEATURES)}, got {self.features}")
        if self.window_bars < 1:
            problems.append(f"window_bars must be >= 1, got {self.window_bars}")
        if self.shift_bars is not None and self.shift_bars < 0:
            problems.append(f"shift_bars must be >= 0, got {self.shift_bars}")
        if self.gap_threshold < 0 or self.frequency < 1:
            problems.append("gap_threshold must be >= 0 and frequency >= 1")
        if self.synthetic_assets < 1 or self.synthetic_bars < 1:
            problems.append("synthetic_assets and synthetic_bars must be >= 1")
        if self.synthetic_amplitude < 0 or self.synthetic_noise < 0:
            problems.append("synthetic_amplitude and synthetic_noise must be >= 0")
        return problems

    def validate(self) -> "ExperimentConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def as_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


PROFILE_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "tiny": {},
    "full": {
        "profile": "full",
        "lookback": 60,
        "signature_lookback": 400,
        "d_model": 198,
        "kan_width": 20,
        "adjuster_hidden": (100, 50),
        "batch_size": 1024,
        "epochs": 100,
        "window_bars": 336,
        "synthetic_bars": 20000,
    },
}


def variant_config(variant: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """``base`` with the variant swapped; backbone, signature and scope follow from it."""
    return replace(base or ExperimentConfig(), variant=variant).validate()


def _field_types() -> Dict[str, Any]:
    return get_type_hints(ExperimentConfig)


def parse_value(name: str, raw: str) -> Any:
    kind = _field_types()[name]
    text = raw.strip()
    if kind == Optional[int]:
        return None if text.lower() in ("", "none") else int(text)
    if kind == Tuple[int, ...]:
        return tuple(int(part) for part in text.split(",") if part.strip())
    if kind == Tuple[str, ...]:
        return tuple(part.strip() for part in text.split(",") if part.strip())
    if kind is float:
        return float(text)
    if kind is int:
        return int(text)
    return text


def format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(str(part) for part in value)
    return str(value)


def _apply(
    values: Dict[str, Any], raw: Mapping[str, str], source: str, problems: List[str]
) -> None:
    known = _field_types()
    for key, text in raw.items():
        if key not in known:
            problems.append(f"{source}: unknown key {key!r}")
            continue
        try:
            values[key] = parse_value(key, text)
        except ValueError:
            problems.append(f"{source}: cannot parse {key} = {text!r}")


def load_config(
    profile: str = "tiny",
    path: Optional[Path] = None,
    env: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    problems: List[str] = []
    if profile not in PROFILES:
        raise ConfigError([f"profile must be one of {list(PROFILES)}, got {profile!r}"])
    values: Dict[str, Any] = dict(PROFILE_DEFAULTS[profile])
    values["profile"] = profile

    if path is not None:
        path = Path(path)
        if not path.exists():
            problems.append(f"{path}: no such config file")
        else:
            _apply(values, read_key_values(path), str(path), problems)

    env = os.environ if env is None else env
    known = _field_types()
    env_values = {
        key[len(ENV_PREFIX) :].lower(): text
        for key, text in env.items()
        if key.startswith(ENV_PREFIX) and key[len(ENV_PREFIX) :].lower() in known
    }
    _apply(values, env_values, "environment", problems)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in known:
            problems.append(f"override: unknown key {key!r}")
        else:
            values[key] = value

    config = ExperimentConfig(**values)
    problems += config.problems()
    if problems:
        raise ConfigError(problems)
    logger.debug("Resolved config: %s", config)
    return config


def write_effective_config(out_dir: Path, config: ExperimentConfig) -> Path:
    path = Path(out_dir) / "effective_config.txt"
    values = {key: format_value(value) for key, value in config.as_dict().items()}
    signature = "on" if config.use_signature else "off"
    header = (
        f"effective sigvwap configuration: {config.backbone} backbone, "
        f"signature {signature}, {config.scope} scope"
    )
    write_key_values(path, values, header=header)
    return path
