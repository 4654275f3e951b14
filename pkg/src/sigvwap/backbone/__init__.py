from sigvwap.backbone.attention import AttentionBlock, attention, causal_mask
from sigvwap.backbone.kan import (
    KanUnivariate,
    RkanSublayer,
    TkanLayer,
    kan_apply,
    rkan_step,
    tkan_step,
)
from sigvwap.backbone.temporal import (
    BackboneShape,
    RecurrentBackbone,
    TemporalBackbone,
    backbone_forward,
    build_backbone,
)
from sigvwap.backbone.vsn import VsnBlock, embed, vsn_forward

__all__ = [
    "AttentionBlock",
    "BackboneShape",
    "KanUnivariate",
    "RecurrentBackbone",
    "RkanSublayer",
    "TemporalBackbone",
    "TkanLayer",
    "VsnBlock",
    "attention",
    "backbone_forward",
    "build_backbone",
    "causal_mask",
    "embed",
    "kan_apply",
    "rkan_step",
    "tkan_step",
    "vsn_forward",
]
