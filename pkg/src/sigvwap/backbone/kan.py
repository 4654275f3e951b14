"""
Kolmogorov-Arnold univariate layers and the recurrent TKAN cell built on them.

Shapes use row vectors: inputs are ``(..., n_in)`` and weights ``(n_in, n_out)``.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from sigvwap.errors import ShapeError
from sigvwap.nn_core import ops
from sigvwap.nn_core.layers import dense, glorot_uniform, recurrent_uniform, zeros
from sigvwap.nn_core.parameter_store import ParameterStore
from sigvwap.nn_core.tensor import Tensor, as_tensor

SPLINE_ORDER = 3
GRID_INTERVALS = 8
GRID_LIMIT = 3.0


def make_knots(intervals: int = GRID_INTERVALS, limit: float = GRID_LIMIT) -> np.ndarray:
    """Uniform knots over [-limit, limit]; no knots are placed past the grid ends."""
    if intervals <= SPLINE_ORDER:
        raise ShapeError(f"need more than {SPLINE_ORDER} grid intervals, got {intervals}")
    return np.linspace(-limit, limit, intervals + 1)


@dataclass
class KanUnivariate:
    """
    ``phi(s)_j = sum_i (spline_ij(s_i) + w_ij * s_i)``. Each spline is a cubic
    B-spline expansion over the bases supported inside the grid, so it goes to
    zero continuously at the grid ends and only the linear bypass remains outside.
    """

    coefficients: Tensor  # (n_in * n_bases, n_out)
    bypass: Tensor  # (n_in, n_out)
    knots: np.ndarray

    @classmethod
    def create(
        cls,
        store: ParameterStore,
        prefix: str,
        n_in: int,
        n_out: int,
        rng: np.random.Generator,
        intervals: int = GRID_INTERVALS,
        limit: float = GRID_LIMIT,
    ) -> "KanUnivariate":
        knots = make_knots(intervals, limit)
        n_bases = len(knots) - SPLINE_ORDER - 1
        coefficients = store.create(
            f"{prefix}.spline",
            (n_in * n_bases, n_out),
            lambda shape: rng.normal(0.0, 0.1, size=shape),
        )
        bypass = store.create(f"{prefix}.bypass", (n_in, n_out), glorot_uniform(rng))
        return cls(coefficients, bypass, knots)

    @property
    def n_bases(self) -> int:
        return len(self.knots) - SPLINE_ORDER - 1

    @property
    def n_in(self) -> int:
        return self.bypass.shape[0]

    def __call__(self, s) -> Tensor:
        return kan_apply(self, s)


def kan_apply(phi: KanUnivariate, s) -> Tensor:
    s = as_tensor(s)
    bases = ops.bspline_basis(s, phi.knots, SPLINE_ORDER)
    flat = ops.reshape(bases, s.shape[:-1] + (phi.n_in * phi.n_bases,))
    return ops.add(dense(flat, phi.coefficients), dense(s, phi.bypass))


@dataclass
class RkanSublayer:
    W_x: Tensor
    W_h: Tensor
    W_hh: Tensor
    W_hz: Tensor
    phi: KanUnivariate

    @classmethod
    def create(cls, store, prefix, n_in, width, rng, intervals=GRID_INTERVALS) -> "RkanSublayer":
        return cls(
            store.create(f"{prefix}.W_x", (n_in, width), glorot_uniform(rng)),
            store.create(f"{prefix}.W_h", (width, width), recurrent_uniform(rng)),
            store.create(f"{prefix}.W_hh", (width, width), recurrent_uniform(rng)),
            store.create(f"{prefix}.W_hz", (width, width), recurrent_uniform(rng)),
            KanUnivariate.create(store, f"{prefix}.phi", width, width, rng, intervals),
        )

    @property
    def width(self) -> int:
        return self.W_hh.shape[0]


def rkan_step(layer: RkanSublayer, x_t, state) -> Tuple[Tensor, Tensor]:
    s = ops.add(dense(x_t, layer.W_x), dense(state, layer.W_h))
    o = kan_apply(layer.phi, s)
    new_state = ops.add(dense(state, layer.W_hh), dense(o, layer.W_hz))
    return o, new_state


@dataclass
class TkanLayer:
    sublayers: List[RkanSublayer]
    W_f: Tensor
    U_f: Tensor
    b_f: Tensor
    W_i: Tensor
    U_i: Tensor
    b_i: Tensor
    W_o: Tensor
    b_o: Tensor
    W_c: Tensor
    U_c: Tensor
    b_c: Tensor

    @classmethod
    def create(
        cls,
        store: ParameterStore,
        prefix: str,
        n_in: int,
        hidden: int,
        rng: np.random.Generator,
        num_sublayers: int = 2,
        kan_width: Optional[int] = None,
        intervals: int = GRID_INTERVALS,
    ) -> "TkanLayer":
        kan_width = kan_width or hidden
        sublayers = [
            RkanSublayer.create(store, f"{prefix}.rkan.{idx}", n_in, kan_width, rng, intervals)
            for idx in range(num_sublayers)
        ]
        glorot, recurrent = glorot_uniform(rng), recurrent_uniform(rng)
        r_width = num_sublayers * kan_width
        return cls(
            sublayers,
            W_f=store.create(f"{prefix}.W_f", (n_in, hidden), glorot),
            U_f=store.create(f"{prefix}.U_f", (hidden, hidden), recurrent),
            b_f=store.create(f"{prefix}.b_f", (hidden,), zeros),
            W_i=store.create(f"{prefix}.W_i", (n_in, hidden), glorot),
            U_i=store.create(f"{prefix}.U_i", (hidden, hidden), recurrent),
            b_i=store.create(f"{prefix}.b_i", (hidden,), zeros),
            W_o=store.create(f"{prefix}.W_o", (r_width, hidden), glorot),
            b_o=store.create(f"{prefix}.b_o", (hidden,), zeros),
            W_c=store.create(f"{prefix}.W_c", (n_in, hidden), glorot),
            U_c=store.create(f"{prefix}.U_c", (hidden, hidden), recurrent),
            b_c=store.create(f"{prefix}.b_c", (hidden,), zeros),
        )

    @property
    def hidden(self) -> int:
        return self.U_f.shape[0]

    def initial_state(self, batch_shape: Tuple[int, ...]):
        h = Tensor(np.zeros(batch_shape + (self.hidden,)))
        c = Tensor(np.zeros(batch_shape + (self.hidden,)))
        states = [Tensor(np.zeros(batch_shape + (sub.width,))) for sub in self.sublayers]
        return h, c, states


def tkan_step(layer: TkanLayer, x_t, h_prev, c_prev, states):
    """
    One TKAN time step. The forget, input and candidate gates read ``x_t``;
    the output gate reads the concatenated sublayer outputs ``r_t``.
    """
    outputs, new_states = [], []
    for sublayer, state in zip(layer.sublayers, states):
        o, new_state = rkan_step(sublayer, x_t, state)
        outputs.append(o)
        new_states.append(new_state)
    r = ops.concat(outputs, axis=-1)

    f = ops.sigmoid(ops.add(ops.add(dense(x_t, layer.W_f), dense(h_prev, layer.U_f)), layer.b_f))
    i = ops.sigmoid(ops.add(ops.add(dense(x_t, layer.W_i), dense(h_prev, layer.U_i)), layer.b_i))
    o_gate = ops.sigmoid(dense(r, layer.W_o, layer.b_o))
    candidate = ops.sigmoid(
        ops.add(ops.add(dense(x_t, layer.W_c), dense(h_prev, layer.U_c)), layer.b_c)
    )
    c = ops.add(ops.mul(f, c_prev), ops.mul(i, candidate))
    h = ops.mul(o_gate, ops.tanh(c))
    return h, c, new_states


def tkan_sequence(layer: TkanLayer, x) -> Tensor:
    """Runs the cell over axis -2 of ``x`` from zero state; returns every hidden state."""
    x = as_tensor(x)
    steps = x.shape[-2]
    h, c, states = layer.initial_state(x.shape[:-2])
    hidden = []
    for t in range(steps):
        x_t = ops.getitem(x, (Ellipsis, t, slice(None)))
        h, c, states = tkan_step(layer, x_t, h, c, states)
        hidden.append(h)
    return ops.stack(hidden, axis=-2)
