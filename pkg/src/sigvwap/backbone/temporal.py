import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from sigvwap.backbone.attention import AttentionBlock, causal_mask, multi_head_attention
from sigvwap.backbone.kan import GRID_INTERVALS, TkanLayer, tkan_sequence
from sigvwap.backbone.vsn import VsnBlock, embed, vsn_forward
from sigvwap.nn_core import ops
from sigvwap.nn_core.layers import DenseWeights, GluWeights, GrnWeights, LayerNormWeights
from sigvwap.nn_core.parameter_store import ParameterStore
from sigvwap.nn_core.tensor import Tensor, as_tensor
from sigvwap.types import Backbone

logger = logging.getLogger(__name__)


@dataclass
class BackboneShape:
    num_variables: int
    d_model: int
    embedding: int = 3
    num_heads: int = 3
    stack_depth: int = 2
    num_sublayers: int = 2
    kan_width: Optional[int] = None
    grid_intervals: int = GRID_INTERVALS


def _tkan_stack(store, shape: BackboneShape, n_in: int, rng) -> List[TkanLayer]:
    layers = []
    for idx in range(shape.stack_depth):
        layers.append(
            TkanLayer.create(
                store,
                f"tkan.{idx}",
                n_in if idx == 0 else shape.d_model,
                shape.d_model,
                rng,
                num_sublayers=shape.num_sublayers,
                kan_width=shape.kan_width,
                intervals=shape.grid_intervals,
            )
        )
    return layers


def _run_stack(layers: List[TkanLayer], x) -> Tensor:
    for layer in layers:
        x = tkan_sequence(layer, x)
    return x


class TemporalBackbone:
    """
    Embedding -> variable selection -> TKAN stack -> gated residual
    ``LayerNorm(skip(s) + GLU(h))`` -> GRN -> causal multi-head attention.

    Parameters live under the ``vsn.*``, ``tkan.{i}.*``, ``gate.*``,
    ``post_grn.*`` and ``attn.*`` prefixes.
    """

    kind: Backbone = "transformer"

    def __init__(self, store: ParameterStore, shape: BackboneShape, rng: np.random.Generator):
        self.shape = shape
        d_model, E = shape.d_model, shape.embedding
        self.vsn = VsnBlock.create(store, shape.num_variables, E, rng)
        self.tkan = _tkan_stack(store, shape, E, rng)
        self.gate = GluWeights.create(store, "gate.glu", d_model, d_model, rng)
        self.gate_skip = None
        if E != d_model:
            self.gate_skip = DenseWeights.create(store, "gate.skip", E, d_model, rng)
        self.gate_norm = LayerNormWeights.create(store, "gate.norm", d_model)
        self.post_grn = GrnWeights.create(store, "post_grn", d_model, d_model, d_model, rng)
        self.attn = AttentionBlock.create(store, d_model, shape.num_heads, rng)
        self.last_importance: Optional[Tensor] = None

    def __call__(self, context) -> Tensor:
        return backbone_forward(self, context)


class RecurrentBackbone:
    """Dense input projection followed by the TKAN stack; the hidden states are the context."""

    kind: Backbone = "recurrent"

    def __init__(self, store: ParameterStore, shape: BackboneShape, rng: np.random.Generator):
        self.shape = shape
        self.input_proj = DenseWeights.create(
            store, "input_proj", shape.num_variables, shape.d_model, rng
        )
        self.tkan = _tkan_stack(store, shape, shape.d_model, rng)
        self.last_importance: Optional[Tensor] = None

    def __call__(self, context) -> Tensor:
        return _run_stack(self.tkan, self.input_proj(as_tensor(context)))


def backbone_forward(backbone: TemporalBackbone, context) -> Tensor:
    """``(..., T, V)`` context rows -> ``(..., T, d_model)`` per-timestep representations."""
    context = as_tensor(context)
    selected, importance = vsn_forward(embed(context, backbone.vsn), backbone.vsn)
    backbone.last_importance = importance

    hidden = _run_stack(backbone.tkan, selected)
    residual = selected if backbone.gate_skip is None else backbone.gate_skip(selected)
    gated = backbone.gate_norm(ops.add(residual, backbone.gate(hidden)))
    enriched = backbone.post_grn(gated)

    out, _ = multi_head_attention(enriched, backbone.attn, causal_mask(context.shape[-2]))
    return out


def build_backbone(
    kind: Backbone, store: ParameterStore, shape: BackboneShape, rng: np.random.Generator
):
    if kind == "transformer":
        return TemporalBackbone(store, shape, rng)
    return RecurrentBackbone(store, shape, rng)
