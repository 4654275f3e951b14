"""
Seeded synthetic markets: a periodic intraday volume profile times lognormal
noise, and a log-price random walk folded back into a band around the start
price.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Union

import numpy as np

from sigvwap.errors import DataError
from sigvwap.model.market import AssetSeries
from sigvwap.model.record import Record
from sigvwap.types import AssetId, Seconds

logger = logging.getLogger(__name__)

# 2021-01-01T00:00:00Z, a whole number of hours and days
DEFAULT_START = 1_609_459_200

Seed = Union[int, np.random.SeedSequence]


@dataclass
class MarketProfile(Record):
    period: int = 24
    amplitude: float = 1.0
    volume_noise: float = 0.3
    price_volatility: float = 0.01
    base_volume: float = 1000.0
    start_price: float = 100.0
    # reflecting bound on |log(P_t / P_0)|
    log_price_bound: float = 1.0
    frequency: Seconds = 3600
    start_timestamp: Seconds = DEFAULT_START
    phase: int = 0

    def validate(self) -> None:
        assert self.period >= 1, self.as_dict()
        assert self.amplitude >= 0, f"amplitude must be >= 0, got {self.amplitude}"
        assert self.volume_noise >= 0 and self.price_volatility >= 0, self.as_dict()
        assert self.base_volume > 0 and self.start_price > 0, self.as_dict()
        assert self.log_price_bound > 0 and self.frequency > 0, self.as_dict()

    def phase_of(self, timestamps: np.ndarray) -> np.ndarray:
        return (np.asarray(timestamps) // self.frequency + self.phase) % self.period

    def seasonal_curve(self) -> np.ndarray:
        """Expected volume at each phase ``0 .. period - 1`` (the noise has mean one)."""
        phases = np.arange(self.period)
        return self.base_volume * np.exp(
            self.amplitude * np.sin(2.0 * np.pi * phases / self.period)
        )


def _fold(x: np.ndarray, bound: float) -> np.ndarray:
    """Reflects a free path into ``[-bound, bound]``."""
    y = np.mod(x + bound, 4.0 * bound)
    return bound - np.abs(y - 2.0 * bound)


def synthesize_market(
    seed: Seed,
    n_bars: int,
    profile: Optional[MarketProfile] = None,
    asset_id: AssetId = "SYN",
) -> AssetSeries:
    if n_bars < 1:
        raise DataError(f"n_bars must be >= 1, got {n_bars}")
    profile = profile or MarketProfile()
    rng = np.random.default_rng(seed)

    timestamps = profile.start_timestamp + profile.frequency * np.arange(n_bars, dtype=np.int64)
    seasonal = profile.seasonal_curve()[profile.phase_of(timestamps)]
    sigma = profile.volume_noise
    noise = np.exp(sigma * rng.standard_normal(n_bars) - 0.5 * sigma**2)
    volumes = seasonal * noise

    steps = profile.price_volatility * rng.standard_normal(n_bars)
    steps[0] = 0.0
    prices = profile.start_price * np.exp(_fold(np.cumsum(steps), profile.log_price_bound))

    return AssetSeries(
        asset_id=asset_id,
        timestamps=timestamps,
        prices=prices,
        volumes=volumes,
        frequency=profile.frequency,
    )


def synthesize_universe(
    seed: Seed,
    asset_ids: Sequence[AssetId],
    n_bars: int,
    profile: Optional[MarketProfile] = None,
    scale_jitter: float = 0.5,
    phase_jitter: int = 0,
) -> Dict[AssetId, AssetSeries]:
    """
    One synthetic series per asset. Every asset gets its own child seed, a
    lognormal scale factor on volume and price, and a phase offset drawn from
    ``0 .. phase_jitter`` bars.
    """
    if len(set(asset_ids)) != len(asset_ids):
        raise DataError(f"duplicate asset ids in {list(asset_ids)}")
    profile = profile or MarketProfile()
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)

    universe: Dict[AssetId, AssetSeries] = {}
    for asset_id, child in zip(asset_ids, root.spawn(len(asset_ids))):
        jitter_seed, market_seed = child.spawn(2)
        rng = np.random.default_rng(jitter_seed)
        volume_scale, price_scale = np.exp(scale_jitter * rng.standard_normal(2))
        asset_profile = replace(
            profile,
            base_volume=profile.base_volume * float(volume_scale),
            start_price=profile.start_price * float(price_scale),
            phase=profile.phase + int(rng.integers(0, phase_jitter + 1)),
        )
        universe[asset_id] = synthesize_market(market_seed, n_bars, asset_profile, asset_id)
    logger.info("Synthesized %d assets of %d bars", len(universe), n_bars)
    return universe
