"""
Sequential volume allocation over an h-bin horizon, and recursive bin refinement.

For bins ``t = 1..h-1`` an adjuster ``f_t`` reads the context row available
when bin t starts (plus the volumes already allocated) and scales the learned
base curve by ``alpha_t = 1 + tanh(f_t)``. Each bin is capped by the remaining
budget and the last bin takes whatever is left, so curves are non-negative and
sum to one by construction.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Sequence, Set, Tuple, Union

import numpy as np

from sigvwap.errors import CheckpointError, ConfigError, ShapeError
from sigvwap.model.allocation import AllocationCurve
from sigvwap.nn_core import ops
from sigvwap.nn_core.layers import DenseWeights, zeros
from sigvwap.nn_core.parameter_store import ParameterStore
from sigvwap.nn_core.tensor import Tensor, as_tensor

logger = logging.getLogger(__name__)

REFINE_THRESHOLD_S = 1440

BASE_PREFIX = "alloc.base"
ADJUSTER_PREFIX = "alloc.adjuster"


@dataclass
class BaseCurve:
    logits: Tensor

    @classmethod
    def create(cls, store: ParameterStore, h: int) -> "BaseCurve":
        return cls(store.create(f"{BASE_PREFIX}.logits", (h,), zeros))

    @property
    def horizon(self) -> int:
        return self.logits.shape[0]

    def curve(self) -> Tensor:
        return ops.softmax(self.logits)


@dataclass
class StepAdjuster:
    """Three-layer feed-forward net ``f_t``; its input width is ``d_model + t - 1``."""

    layers: List[DenseWeights]

    @classmethod
    def create(
        cls,
        store: ParameterStore,
        bin_index: int,
        n_in: int,
        hidden: Sequence[int],
        rng: np.random.Generator,
    ) -> "StepAdjuster":
        widths = [n_in, *hidden, 1]
        layers = [
            DenseWeights.create(store, f"{ADJUSTER_PREFIX}.{bin_index}.w{idx + 1}", a, b, rng)
            for idx, (a, b) in enumerate(zip(widths[:-1], widths[1:]))
        ]
        return cls(layers)

    def __call__(self, x) -> Tensor:
        for layer in self.layers[:-1]:
            x = ops.relu(layer(x))
        return self.layers[-1](x)


class VolumeAllocator:
    def __init__(
        self,
        store: ParameterStore,
        d_model: int,
        horizon: int,
        rng: np.random.Generator,
        hidden: Sequence[int] = (100, 50),
    ):
        if horizon < 2:
            raise ShapeError(f"horizon must be >= 2, got {horizon}")
        self.d_model = d_model
        self.horizon = horizon
        self.base = BaseCurve.create(store, horizon)
        self.adjusters = [
            StepAdjuster.create(store, t, d_model + t - 1, hidden, rng)
            for t in range(1, horizon)
        ]

    def __call__(self, a, lookback: int) -> Tuple[Tensor, Tensor]:
        return allocation_weights(a, self.base, self.adjusters, lookback)


def allocation_weights(
    a, base: BaseCurve, adjusters: Sequence[StepAdjuster], lookback: int
) -> Tuple[Tensor, Tensor]:
    """
    Differentiable allocation for context ``a`` of shape ``(..., l + h - 1, d_model)``.
    Returns the volumes ``(..., h)`` and the multipliers ``alpha`` ``(..., h - 1)``.
    """
    a = as_tensor(a)
    h = base.horizon
    if lookback < 1:
        raise ShapeError(f"lookback must be >= 1, got {lookback}")
    if len(adjusters) != h - 1:
        raise ShapeError(f"{len(adjusters)} adjusters for horizon {h}")
    if a.shape[-2] < lookback + h - 2:
        raise ShapeError(f"context has {a.shape[-2]} rows, need {lookback + h - 2}")
    if not np.all(np.isfinite(a.value)):
        raise ShapeError("non-finite context")

    lead = a.shape[:-2]
    v_base = base.curve()
    remaining = Tensor(np.ones(lead + (1,)))
    volumes: List[Tensor] = []
    alphas: List[Tensor] = []
    for t in range(1, h):
        row = ops.getitem(a, (Ellipsis, lookback - 1 + (t - 1), slice(None)))
        features = row if t == 1 else ops.concat([row, *volumes], axis=-1)
        alpha = ops.add(1.0, ops.tanh(adjusters[t - 1](features)))
        proposal = ops.mul(alpha, ops.getitem(v_base, slice(t - 1, t)))
        v_t = ops.minimum(ops.maximum(proposal, 0.0), remaining)
        remaining = ops.sub(remaining, v_t)
        volumes.append(v_t)
        alphas.append(alpha)
    volumes.append(remaining)
    return ops.concat(volumes, axis=-1), ops.concat(alphas, axis=-1)


def allocate(
    a, base: BaseCurve, adjusters: Sequence[StepAdjuster], lookback: int
) -> AllocationCurve:
    """Allocation curve for a single ``(l + h - 1, d_model)`` context."""
    volumes, _ = allocation_weights(a, base, adjusters, lookback)
    if volumes.ndim != 1:
        raise ShapeError(f"allocate takes one context, got batch shape {volumes.shape[:-1]}")
    return AllocationCurve(volumes.numpy().copy())


def naive_allocation(h: int) -> AllocationCurve:
    if h < 1:
        raise ShapeError(f"horizon must be >= 1, got {h}")
    weights = np.full(h, 1.0 / h)
    weights[-1] = 1.0 - weights[:-1].sum()
    return AllocationCurve(weights)


def zero_adjusters(store: ParameterStore) -> int:
    """Zeroes every adjuster output layer so alpha == 1 and the base curve is returned."""
    layers_by_bin: Dict[str, Set[int]] = {}
    for name in store.names():
        if name.startswith(f"{ADJUSTER_PREFIX}."):
            # alloc.adjuster.<t>.w<n>.<W|b>
            _, _, bin_index, layer, _ = name.split(".")
            layers_by_bin.setdefault(bin_index, set()).add(int(layer[1:]))

    zeroed = 0
    for bin_index, layers in layers_by_bin.items():
        for suffix in ("W", "b"):
            name = f"{ADJUSTER_PREFIX}.{bin_index}.w{max(layers)}.{suffix}"
            if name in store:
                store[name].value[...] = 0.0
                zeroed += 1
    logger.info("Zeroed %d adjuster output arrays", zeroed)
    return zeroed


def base_curve_of(store: ParameterStore) -> AllocationCurve:
    logits = store[f"{BASE_PREFIX}.logits"].value
    e = np.exp(logits - logits.max())
    weights = e / e.sum()
    weights[-1] = 1.0 - weights[:-1].sum()
    return AllocationCurve(np.maximum(weights, 0.0))


# Recursive refinement

SubAllocator = Callable[[int], AllocationCurve]


def static_sub_allocator(curve: Union[AllocationCurve, np.ndarray]) -> SubAllocator:
    if not isinstance(curve, AllocationCurve):
        curve = AllocationCurve(curve)
    return lambda _leaf: curve


@dataclass
class RefinedAllocation:
    curve: AllocationCurve
    bin_seconds: np.ndarray
    parent_index: np.ndarray

    def parent_mass(self, num_parent_bins: int) -> np.ndarray:
        return np.bincount(
            self.parent_index, weights=self.curve.weights, minlength=num_parent_bins
        )


def refine_allocation(
    parent: AllocationCurve,
    bin_duration_s: int,
    sub_allocators: Mapping[int, SubAllocator],
    threshold_s: int = REFINE_THRESHOLD_S,
) -> RefinedAllocation:
    """
    Replaces every bin longer than ``threshold_s`` by its weight times the
    sub-allocation of the allocator registered for that bin duration, then
    recurses into the new bins until no leaf exceeds the threshold.
    """
    weights: List[float] = []
    durations: List[int] = []
    parents: List[int] = []

    def expand(weight: float, duration: int, parent_bin: int) -> None:
        if duration <= threshold_s:
            weights.append(weight)
            durations.append(duration)
            parents.append(parent_bin)
            return
        if duration not in sub_allocators:
            raise CheckpointError(f"no sub-allocator for {duration} s bins")
        sub = sub_allocators[duration](len(weights))
        if duration % sub.horizon:
            raise ConfigError([f"{duration} s bins do not split into {sub.horizon} sub-bins"])
        child = duration // sub.horizon
        for sub_weight in sub.weights:
            expand(weight * sub_weight, child, parent_bin)

    for idx, weight in enumerate(parent.weights):
        expand(float(weight), bin_duration_s, idx)

    refined = RefinedAllocation(
        AllocationCurve(np.array(weights)),
        np.array(durations, dtype=np.int64),
        np.array(parents, dtype=np.int64),
    )
    assert np.allclose(refined.parent_mass(len(parent)), parent.weights, rtol=0, atol=1e-12), (
        "refinement lost mass"
    )
    return refined
