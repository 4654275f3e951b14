from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from sigvwap.errors import ShapeError
from sigvwap.nn_core import ops
from sigvwap.nn_core.layers import dense, glorot_uniform
from sigvwap.nn_core.parameter_store import ParameterStore
from sigvwap.nn_core.tensor import Tensor, as_tensor


def causal_mask(T: int) -> np.ndarray:
    """Additive mask: 0 where key j <= query i, -inf above the diagonal."""
    if T < 1:
        raise ShapeError(f"mask length must be >= 1, got {T}")
    mask = np.zeros((T, T))
    mask[np.triu_indices(T, k=1)] = -np.inf
    return mask


@dataclass
class AttentionBlock:
    """Per-head projections are the column blocks of the (d_model, d_model) W_Q, W_K and W_V."""

    W_Q: Tensor
    W_K: Tensor
    W_V: Tensor
    W_O: Tensor
    num_heads: int

    @classmethod
    def create(
        cls,
        store: ParameterStore,
        d_model: int,
        num_heads: int,
        rng: np.random.Generator,
        prefix: str = "attn",
    ) -> "AttentionBlock":
        if d_model % num_heads:
            raise ShapeError(f"{num_heads} heads do not divide d_model={d_model}")
        glorot = glorot_uniform(rng)
        return cls(
            store.create(f"{prefix}.W_Q", (d_model, d_model), glorot),
            store.create(f"{prefix}.W_K", (d_model, d_model), glorot),
            store.create(f"{prefix}.W_V", (d_model, d_model), glorot),
            store.create(f"{prefix}.W_O", (d_model, d_model), glorot),
            num_heads,
        )

    @property
    def d_model(self) -> int:
        return self.W_Q.shape[0]


def _split_heads(x: Tensor, num_heads: int) -> Tensor:
    lead, T, width = x.shape[:-2], x.shape[-2], x.shape[-1]
    heads = ops.reshape(x, lead + (T, num_heads, width // num_heads))
    axes = tuple(range(len(lead))) + tuple(len(lead) + a for a in (1, 0, 2))
    return ops.transpose(heads, axes)


def _merge_heads(x: Tensor) -> Tensor:
    lead = x.shape[:-3]
    num_heads, T, width = x.shape[-3:]
    axes = tuple(range(len(lead))) + tuple(len(lead) + a for a in (1, 0, 2))
    return ops.reshape(ops.transpose(x, axes), lead + (T, num_heads * width))


def attention(
    Q,
    K,
    V,
    mask: Optional[np.ndarray],
    num_heads: int = 1,
    W_O=None,
    return_weights: bool = False,
):
    """
    Scaled dot-product attention over projected ``(..., T, d_model)`` inputs,
    split into ``num_heads`` heads, concatenated and projected by ``W_O``.
    """
    Q, K, V = as_tensor(Q), as_tensor(K), as_tensor(V)
    if Q.shape != K.shape or Q.shape != V.shape:
        raise ShapeError(f"Q/K/V shapes differ: {Q.shape}, {K.shape}, {V.shape}")
    T, d_model = Q.shape[-2], Q.shape[-1]
    if d_model % num_heads:
        raise ShapeError(f"{num_heads} heads do not divide width {d_model}")
    if mask is not None and mask.shape != (T, T):
        raise ShapeError(f"mask {mask.shape} does not match sequence length {T}")
    d_attn = d_model // num_heads

    q, k, v = (_split_heads(t, num_heads) for t in (Q, K, V))
    k_t = ops.transpose(k, tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2))
    scores = ops.mul(ops.matmul(q, k_t), 1.0 / np.sqrt(d_attn))
    weights = ops.softmax(scores, axis=-1, mask=mask)
    out = _merge_heads(ops.matmul(weights, v))
    if W_O is not None:
        out = dense(out, W_O)
    if return_weights:
        return out, weights
    return out


def multi_head_attention(
    x, block: AttentionBlock, mask: Optional[np.ndarray] = None
) -> Tuple[Tensor, Tensor]:
    x = as_tensor(x)
    if mask is None:
        mask = causal_mask(x.shape[-2])
    return attention(
        dense(x, block.W_Q),
        dense(x, block.W_K),
        dense(x, block.W_V),
        mask,
        num_heads=block.num_heads,
        W_O=block.W_O,
        return_weights=True,
    )
