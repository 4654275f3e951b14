"""
Dense, GLU, layer-norm and gated-residual building blocks.

Weights are plain :class:`Tensor` handles owned by a :class:`ParameterStore`;
the small ``*Weights`` dataclasses only group the handles a block needs.
Matrix products follow numpy's batched ``matmul`` rules, so a weight with a
leading variable axis ``(V, n_in, n_out)`` applied to input ``(..., V, 1, n_in)``
gives V independent blocks in one call.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from sigvwap.errors import ShapeError
from sigvwap.nn_core import ops
from sigvwap.nn_core.parameter_store import Initializer, ParameterStore
from sigvwap.nn_core.tensor import Tensor, as_tensor

LAYER_NORM_EPS = 1e-5


# Initializers


def glorot_uniform(rng: np.random.Generator) -> Initializer:
    def init(shape: Tuple[int, ...]) -> np.ndarray:
        fan_in, fan_out = shape[-2], shape[-1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    return init


def recurrent_uniform(rng: np.random.Generator) -> Initializer:
    """Uniform ±1/sqrt(n) for square state-to-state matrices."""

    def init(shape: Tuple[int, ...]) -> np.ndarray:
        limit = 1.0 / np.sqrt(shape[-1])
        return rng.uniform(-limit, limit, size=shape)

    return init


def zeros(shape: Tuple[int, ...]) -> np.ndarray:
    return np.zeros(shape)


def ones(shape: Tuple[int, ...]) -> np.ndarray:
    return np.ones(shape)


def constant(value: float) -> Initializer:
    return lambda shape: np.full(shape, value)


# Functional forms


def dense(x, W, b=None) -> Tensor:
    x, W = as_tensor(x), as_tensor(W)
    if x.shape[-1] != W.shape[-2]:
        raise ShapeError(f"dense: input width {x.shape[-1]} vs weight {W.shape}")
    if x.ndim >= 2:
        out = ops.matmul(x, W)
    else:
        out = ops.reshape(ops.matmul(ops.reshape(x, (1, -1)), W), (-1,))
    return out if b is None else ops.add(out, b)


def glu(x, W4, b4, W5, b5) -> Tensor:
    return ops.mul(ops.sigmoid(dense(x, W4, b4)), dense(x, W5, b5))


def layer_norm(x, gamma, beta, eps: float = LAYER_NORM_EPS) -> Tensor:
    return ops.layer_norm_op(x, gamma, beta, eps)


# Parameter groups


@dataclass
class DenseWeights:
    W: Tensor
    b: Optional[Tensor]

    @classmethod
    def create(
        cls,
        store: ParameterStore,
        prefix: str,
        n_in: int,
        n_out: int,
        rng: np.random.Generator,
        bias: bool = True,
        groups: Optional[int] = None,
    ) -> "DenseWeights":
        lead = () if groups is None else (groups,)
        W = store.create(f"{prefix}.W", lead + (n_in, n_out), glorot_uniform(rng))
        b = None
        if bias:
            b_shape = (n_out,) if groups is None else (groups, 1, n_out)
            b = store.create(f"{prefix}.b", b_shape, zeros)
        return cls(W, b)

    def __call__(self, x) -> Tensor:
        return dense(x, self.W, self.b)


@dataclass
class GluWeights:
    W4: Tensor
    b4: Tensor
    W5: Tensor
    b5: Tensor

    @classmethod
    def create(cls, store, prefix, n_in, n_out, rng, groups=None) -> "GluWeights":
        gate = DenseWeights.create(store, f"{prefix}.gate", n_in, n_out, rng, groups=groups)
        value = DenseWeights.create(store, f"{prefix}.value", n_in, n_out, rng, groups=groups)
        return cls(gate.W, gate.b, value.W, value.b)

    def __call__(self, x) -> Tensor:
        return glu(x, self.W4, self.b4, self.W5, self.b5)


@dataclass
class LayerNormWeights:
    gamma: Tensor
    beta: Tensor

    @classmethod
    def create(cls, store, prefix, width, groups=None) -> "LayerNormWeights":
        shape = (width,) if groups is None else (groups, 1, width)
        return cls(
            store.create(f"{prefix}.gamma", shape, ones),
            store.create(f"{prefix}.beta", shape, zeros),
        )

    def __call__(self, x) -> Tensor:
        return layer_norm(x, self.gamma, self.beta)


@dataclass
class GrnWeights:
    """
    Context-free gated residual network:
    ``LayerNorm(skip(x) + GLU(W1 · ELU(W2 · x + b2) + b1))``.

    ``skip`` is the identity when input and output widths agree, otherwise a
    dense projection. With ``groups`` every array gains a leading variable axis
    and inputs are expected as ``(..., groups, 1, n_in)``.
    """

    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    glu: GluWeights
    norm: LayerNormWeights
    skip: Optional[DenseWeights] = None

    @classmethod
    def create(
        cls,
        store: ParameterStore,
        prefix: str,
        n_in: int,
        n_hidden: int,
        n_out: int,
        rng: np.random.Generator,
        groups: Optional[int] = None,
    ) -> "GrnWeights":
        inner = DenseWeights.create(store, f"{prefix}.w2", n_in, n_hidden, rng, groups=groups)
        outer = DenseWeights.create(store, f"{prefix}.w1", n_hidden, n_hidden, rng, groups=groups)
        gate = GluWeights.create(store, f"{prefix}.glu", n_hidden, n_out, rng, groups=groups)
        norm = LayerNormWeights.create(store, f"{prefix}.norm", n_out, groups=groups)
        skip = None
        if n_in != n_out:
            skip = DenseWeights.create(store, f"{prefix}.skip", n_in, n_out, rng, groups=groups)
        return cls(outer.W, outer.b, inner.W, inner.b, gate, norm, skip)

    def __call__(self, x) -> Tensor:
        return grn(x, self)


def grn(x, weights: GrnWeights) -> Tensor:
    eta2 = ops.elu(dense(x, weights.W2, weights.b2))
    eta1 = dense(eta2, weights.W1, weights.b1)
    residual = x if weights.skip is None else weights.skip(x)
    return weights.norm(ops.add(residual, weights.glu(eta1)))
