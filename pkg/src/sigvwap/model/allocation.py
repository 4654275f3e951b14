from dataclasses import dataclass

import numpy as np

from sigvwap.model.record import Record

CONSERVATION_TOL = 1e-12


@dataclass
class AllocationCurve(Record):
    """Non-negative per-bin order fractions summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        super().__post_init__()

    def validate(self) -> None:
        assert self.weights.ndim == 1 and len(self.weights) >= 1, self.weights.shape
        assert np.all(self.weights >= 0), f"negative bin weight: {self.weights.min()}"
        assert abs(self.weights.sum() - 1.0) <= CONSERVATION_TOL * len(self.weights), (
            f"allocation sums to {self.weights.sum()!r}"
        )

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def horizon(self) -> int:
        return len(self.weights)
