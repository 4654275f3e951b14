from dataclasses import dataclass

import numpy as np

from sigvwap.model.allocation import AllocationCurve
from sigvwap.model.record import Record

BASIS_POINT = 1e-4
MILLIONTH = 1e-6


@dataclass
class ExecutionRecord(Record):
    prices: np.ndarray
    volumes: np.ndarray
    allocation: AllocationCurve

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=np.float64)
        self.volumes = np.asarray(self.volumes, dtype=np.float64)
        super().__post_init__()

    def validate(self) -> None:
        h = len(self.allocation)
        assert self.prices.shape == (h,) and self.volumes.shape == (h,), (
            self.prices.shape,
            self.volumes.shape,
            h,
        )

    @property
    def market_fractions(self) -> np.ndarray:
        total = self.volumes.sum()
        if total <= 0:
            return np.zeros_like(self.volumes)
        return self.volumes / total


@dataclass
class LossReport(Record):
    """Relative VWAP deviation of one execution; ``signed`` keeps the direction."""

    signed: float
    absolute: float
    quadratic: float

    def validate(self) -> None:
        assert self.absolute >= 0, self.as_dict()
        tolerance = 1e-15 + 1e-12 * self.quadratic
        assert abs(self.quadratic - self.signed**2) <= tolerance, self.as_dict()

    @property
    def absolute_bp(self) -> float:
        return self.absolute / BASIS_POINT

    @property
    def quadratic_millionths(self) -> float:
        return self.quadratic / MILLIONTH


@dataclass
class SlippageDecomposition(Record):
    price_component: float
    allocation_component: float
    realized: float

    def validate(self) -> None:
        assert self.realized <= self.price_component + self.allocation_component + 1e-12, (
            self.as_dict()
        )

    @property
    def bound(self) -> float:
        return self.price_component + self.allocation_component
