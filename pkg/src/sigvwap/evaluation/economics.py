"""
VWAP economics of one execution over an h-bin horizon.

Deviations are relative, ``exec / vwap - 1``, so they are invariant to the
price scale of the asset; absolute losses are reported in basis points and
quadratic losses in millionths.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from sigvwap.errors import DataError
from sigvwap.model.allocation import CONSERVATION_TOL, AllocationCurve
from sigvwap.model.execution import ExecutionRecord, LossReport, SlippageDecomposition
from sigvwap.model.market import SampleWindow

Allocation = Union[AllocationCurve, Sequence[float], np.ndarray]


def as_curve(allocation: Allocation) -> AllocationCurve:
    if isinstance(allocation, AllocationCurve):
        return allocation
    weights = np.asarray(allocation, dtype=np.float64)
    if weights.ndim != 1 or len(weights) == 0:
        raise DataError(f"allocation must be a non-empty vector, got shape {weights.shape}")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > CONSERVATION_TOL * len(weights):
        raise DataError(f"invalid allocation {weights.tolist()}: needs weights >= 0 summing to 1")
    return AllocationCurve(weights)


def market_vwap(prices, volumes) -> float:
    prices = np.asarray(prices, dtype=np.float64)
    volumes = np.asarray(volumes, dtype=np.float64)
    total = volumes.sum()
    if total <= 0:
        raise DataError("market VWAP undefined: zero total volume")
    return float(prices @ volumes / total)


def exec_price(prices, allocation: Allocation) -> float:
    curve = as_curve(allocation)
    prices = np.asarray(prices, dtype=np.float64)
    if prices.shape != curve.weights.shape:
        raise DataError(f"{len(prices)} prices for a {curve.horizon}-bin allocation")
    return float(prices @ curve.weights)


def vwap_losses(record: ExecutionRecord) -> LossReport:
    vwap = market_vwap(record.prices, record.volumes)
    if vwap == 0:
        raise DataError("zero VWAP")
    deviation = exec_price(record.prices, record.allocation) / vwap - 1.0
    return LossReport(signed=deviation, absolute=abs(deviation), quadratic=deviation**2)


def slippage_bound(
    record: ExecutionRecord, bin_vwaps: Optional[np.ndarray] = None
) -> SlippageDecomposition:
    """
    Splits the realized slippage ``|exec - VWAP|`` into a price-deviation part
    ``sum |(P_t - VWAP_t) q_t|`` and an allocation-error part
    ``sum |VWAP_t (q_t - V_t)|``. At bar granularity ``VWAP_t`` is the bar price.
    """
    vwap_t = record.prices if bin_vwaps is None else np.asarray(bin_vwaps, dtype=np.float64)
    if vwap_t.shape != record.prices.shape:
        raise DataError(f"{len(vwap_t)} bin VWAPs for {len(record.prices)} bins")
    q = record.allocation.weights
    fractions = record.market_fractions
    return SlippageDecomposition(
        price_component=float(np.abs((record.prices - vwap_t) * q).sum()),
        allocation_component=float(np.abs(vwap_t * (q - fractions)).sum()),
        realized=abs(exec_price(record.prices, q) - float(vwap_t @ fractions)),
    )


def improvement_vs_baseline(model_losses, baseline_losses) -> float:
    """``1 - mean(model) / mean(baseline)``: a ratio of means over the same samples."""
    model = np.asarray(model_losses, dtype=np.float64)
    baseline = np.asarray(baseline_losses, dtype=np.float64)
    if model.shape != baseline.shape:
        raise DataError(f"{model.size} model losses against {baseline.size} baseline losses")
    if baseline.size == 0 or baseline.mean() == 0:
        raise DataError("baseline mean loss is zero")
    return float(1.0 - model.mean() / baseline.mean())


def oracle_allocation(window: SampleWindow) -> AllocationCurve:
    """The market's own volume fractions: zero slippage by construction."""
    fractions = window.target_volumes / window.target_volumes.sum()
    fractions[-1] = max(0.0, 1.0 - fractions[:-1].sum())
    return AllocationCurve(fractions)


def window_losses(
    window: SampleWindow, model: Allocation, baseline: Allocation
) -> Tuple[LossReport, LossReport]:
    return (
        vwap_losses(ExecutionRecord(window.target_prices, window.target_volumes, as_curve(model))),
        vwap_losses(
            ExecutionRecord(window.target_prices, window.target_volumes, as_curve(baseline))
        ),
    )
