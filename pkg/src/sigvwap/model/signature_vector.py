from dataclasses import dataclass
from typing import List

import numpy as np

from sigvwap.model.record import Record


def signature_dim(d: int, k: int) -> int:
    """Depth-``k`` signature coefficients of a ``d``-dimensional path, constant term dropped."""
    if d == 1:
        return k
    return (d ** (k + 1) - d) // (d - 1)


@dataclass
class SignatureVector(Record):
    """
    Truncated signature coefficients ordered level by level, row-major
    (lexicographic multi-index) within a level.
    """

    depth: int
    dim: int
    coefficients: np.ndarray

    def validate(self) -> None:
        assert self.depth >= 1 and self.dim >= 1, (self.depth, self.dim)
        assert self.coefficients.shape == (signature_dim(self.dim, self.depth),), (
            self.depth,
            self.dim,
            self.coefficients.shape,
        )

    def level(self, n: int) -> np.ndarray:
        start = signature_dim(self.dim, n - 1) if n > 1 else 0
        return self.coefficients[start : start + self.dim**n]

    def levels(self) -> List[np.ndarray]:
        return [self.level(n) for n in range(1, self.depth + 1)]
