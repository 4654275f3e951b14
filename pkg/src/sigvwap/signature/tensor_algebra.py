"""
Truncated tensor algebra over R^d, with the unit constant term implicit.

A truncated element is handled as a list of levels ``[L1, ..., Lk]`` where
``Ln`` has shape ``(..., d**n)`` (row-major flattening of the n-fold tensor).
All arithmetic goes through the differentiable primitives, so the same code
serves plain evaluation and gradient recording.
"""

from typing import List, Sequence

import numpy as np

from sigvwap.errors import ShapeError
from sigvwap.model.signature_vector import SignatureVector, signature_dim
from sigvwap.nn_core import ops
from sigvwap.nn_core.tensor import Tensor, as_tensor

Levels = List[Tensor]


def split_levels(coefficients, d: int, k: int) -> Levels:
    coefficients = as_tensor(coefficients)
    if coefficients.shape[-1] != signature_dim(d, k):
        raise ShapeError(
            f"{coefficients.shape[-1]} coefficients do not form a depth-{k} signature over R^{d}"
        )
    levels, start = [], 0
    for n in range(1, k + 1):
        size = d**n
        levels.append(ops.getitem(coefficients, (Ellipsis, slice(start, start + size))))
        start += size
    return levels


def join_levels(levels: Sequence[Tensor]) -> Tensor:
    return ops.concat(list(levels), axis=-1)


def segment_exponential(delta, k: int) -> Levels:
    """Signature of one straight segment with increment ``delta``: levels delta^{⊗n} / n!."""
    delta = as_tensor(delta)
    levels = [delta]
    for n in range(2, k + 1):
        levels.append(ops.mul(ops.outer(levels[-1], delta), 1.0 / n))
    return levels


def chen_levels(a: Levels, b: Levels) -> Levels:
    """Level n of the product is a_n + b_n + sum over p + q = n, p, q >= 1, of a_p ⊗ b_q."""
    if len(a) != len(b):
        raise ShapeError(f"depths differ: {len(a)} vs {len(b)}")
    out = []
    for n in range(1, len(a) + 1):
        level = ops.add(a[n - 1], b[n - 1])
        for p in range(1, n):
            level = ops.add(level, ops.outer(a[p - 1], b[n - p - 1]))
        out.append(level)
    return out


def signature_coefficients(path, k: int) -> Tensor:
    """
    Depth-``k`` signature of the piecewise-linear path through the rows of
    ``path`` (shape ``(..., L, d)``), returned as ``(..., m)`` coefficients.
    Increments are folded left to right with Chen's relation.
    """
    path = as_tensor(path)
    if path.ndim < 2 or path.shape[-2] < 2:
        raise ShapeError(f"need at least two path points, got shape {path.shape}")
    if k < 1:
        raise ShapeError(f"depth must be >= 1, got {k}")
    if not np.all(np.isfinite(path.value)):
        raise ShapeError("non-finite path values")

    increments = ops.sub(
        ops.getitem(path, (Ellipsis, slice(1, None), slice(None))),
        ops.getitem(path, (Ellipsis, slice(None, -1), slice(None))),
    )
    levels = segment_exponential(ops.getitem(increments, (Ellipsis, 0, slice(None))), k)
    for j in range(1, increments.shape[-2]):
        step = segment_exponential(ops.getitem(increments, (Ellipsis, j, slice(None))), k)
        levels = chen_levels(levels, step)
    return join_levels(levels)


def truncated_signature(path: np.ndarray, k: int) -> SignatureVector:
    path = np.asarray(path, dtype=np.float64)
    if path.ndim != 2:
        raise ShapeError(f"expected an L x d path, got shape {path.shape}")
    coefficients = signature_coefficients(path, k).numpy().copy()
    return SignatureVector(depth=k, dim=path.shape[1], coefficients=coefficients)


def chen_product(a: SignatureVector, b: SignatureVector, k: int) -> SignatureVector:
    if a.dim != b.dim:
        raise ShapeError(f"path dimensions differ: {a.dim} vs {b.dim}")
    if a.depth < k or b.depth < k:
        raise ShapeError(f"cannot form a depth-{k} product of depths {a.depth}, {b.depth}")
    a_levels = [as_tensor(level) for level in a.levels()[:k]]
    b_levels = [as_tensor(level) for level in b.levels()[:k]]
    coefficients = join_levels(chen_levels(a_levels, b_levels)).numpy().copy()
    return SignatureVector(depth=k, dim=a.dim, coefficients=coefficients)


def zero_signature(d: int, k: int) -> SignatureVector:
    """Signature of the empty path, i.e. the unit of the product."""
    return SignatureVector(depth=k, dim=d, coefficients=np.zeros(signature_dim(d, k)))
