import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from sigvwap.errors import ShapeError
from sigvwap.nn_core import ops
from sigvwap.nn_core.layers import GrnWeights, glorot_uniform, zeros
from sigvwap.nn_core.parameter_store import ParameterStore
from sigvwap.nn_core.tensor import Tensor, as_tensor

logger = logging.getLogger(__name__)


@dataclass
class VsnBlock:
    """
    Variable selection: every scalar input variable gets its own dense
    embedding of width E and its own GRN; a GRN over the flattened embeddings
    produces per-timestep softmax importance weights that mix the processed
    variables back into one E-wide vector.
    """

    W_embed: Tensor  # (V, E)
    b_embed: Tensor  # (V, E)
    importance: GrnWeights
    variable_grns: GrnWeights  # grouped over V

    @classmethod
    def create(
        cls,
        store: ParameterStore,
        num_variables: int,
        embedding: int,
        rng: np.random.Generator,
        prefix: str = "vsn",
    ) -> "VsnBlock":
        V, E = num_variables, embedding
        # one (1, E) dense kernel per variable
        W_embed = store.create(
            f"{prefix}.embed.W",
            (V, E),
            lambda shape: np.concatenate([glorot_uniform(rng)((1, E)) for _ in range(V)]),
        )
        b_embed = store.create(f"{prefix}.embed.b", (V, E), zeros)
        importance = GrnWeights.create(store, f"{prefix}.importance", V * E, E, V, rng)
        variable_grns = GrnWeights.create(store, f"{prefix}.var", E, E, E, rng, groups=V)
        return cls(W_embed, b_embed, importance, variable_grns)

    @property
    def num_variables(self) -> int:
        return self.W_embed.shape[0]

    @property
    def embedding(self) -> int:
        return self.W_embed.shape[1]


def embed(x, block: VsnBlock) -> Tensor:
    """``(..., V)`` scalars -> ``(..., V, E)``: xi_j = x_j * W_j + b_j, shared over time."""
    x = as_tensor(x)
    if x.shape[-1] != block.num_variables:
        raise ShapeError(f"expected {block.num_variables} variables, got {x.shape[-1]}")
    lifted = ops.reshape(x, x.shape + (1,))
    return ops.add(ops.mul(lifted, block.W_embed), block.b_embed)


def vsn_forward(embeddings, block: VsnBlock) -> Tuple[Tensor, Tensor]:
    """
    Returns the selected features ``(..., E)`` and the importance weights
    ``(..., V)`` for embeddings of shape ``(..., V, E)``.
    """
    embeddings = as_tensor(embeddings)
    lead = embeddings.shape[:-2]
    V, E = block.num_variables, block.embedding

    flat = ops.reshape(embeddings, lead + (V * E,))
    weights = ops.softmax(block.importance(flat), axis=-1)

    grouped = ops.reshape(embeddings, lead + (V, 1, E))
    processed = ops.reshape(block.variable_grns(grouped), lead + (V, E))
    mixed = ops.mul(ops.reshape(weights, lead + (V, 1)), processed)
    return ops.sum_(mixed, axis=-2), weights
