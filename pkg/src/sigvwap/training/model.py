"""
The execution model of one variant: optional signature features, a temporal
backbone and the sequential volume allocator, all sharing one ParameterStore.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from sigvwap.allocator import VolumeAllocator
from sigvwap.backbone.temporal import build_backbone
from sigvwap.config import ExperimentConfig
from sigvwap.errors import CheckpointError, ShapeError
from sigvwap.model.allocation import AllocationCurve
from sigvwap.model.market import SampleWindow
from sigvwap.nn_core import ops
from sigvwap.nn_core.parameter_store import ParameterStore
from sigvwap.nn_core.tensor import Tensor
from sigvwap.signature.features import SignatureFeatures, repeat_context
from sigvwap.types import Mode

logger = logging.getLogger(__name__)


@dataclass
class WindowBatch:
    local: np.ndarray
    signature: np.ndarray
    prices: np.ndarray
    volumes: np.ndarray

    def __len__(self) -> int:
        return len(self.prices)

    @classmethod
    def stack(cls, windows: Sequence[SampleWindow]) -> "WindowBatch":
        if not windows:
            raise ShapeError("cannot batch zero windows")
        return cls(
            local=np.stack([w.local_window for w in windows]),
            signature=np.stack([w.signature_window for w in windows]),
            prices=np.stack([w.target_prices for w in windows]),
            volumes=np.stack([w.target_volumes for w in windows]),
        )

    @property
    def vwap(self) -> np.ndarray:
        return (self.prices * self.volumes).sum(axis=-1) / self.volumes.sum(axis=-1)


def vwap_loss(volumes: Tensor, batch: WindowBatch) -> Tensor:
    """Mean absolute relative deviation ``|sum_t P_t v_t / VWAP - 1|`` over the batch."""
    relative_prices = batch.prices / batch.vwap[:, None]
    deviation = ops.sub(ops.sum_(ops.mul(volumes, relative_prices), axis=-1), 1.0)
    return ops.mean(ops.abs_(deviation))


class VwapModel:
    def __init__(self, config: ExperimentConfig, seed: Optional[int] = None):
        self.config = config
        self.seed = config.seed if seed is None else seed
        self.store = ParameterStore()
        rng = np.random.default_rng(self.seed)

        num_features = len(config.features)
        self.signature: Optional[SignatureFeatures] = None
        shape = config.backbone_shape()
        if config.use_signature:
            self.signature = SignatureFeatures(
                self.store, config.signature_lookback, num_features, config.signature_depth
            )
            shape.num_variables = num_features + self.signature.m
        self.backbone = build_backbone(config.backbone, self.store, shape, rng)
        self.allocator = VolumeAllocator(
            self.store, config.d_model, config.horizon, rng, hidden=config.adjuster_hidden
        )
        self.store.metadata.update(
            variant=config.variant,
            seed=self.seed,
            horizon=config.horizon,
            bin_seconds=config.frequency,
        )
        logger.debug(
            "%s model with %d trainable values", config.variant, self.store.num_parameters()
        )

    @property
    def variable_names(self) -> List[str]:
        names = list(self.config.features)
        if self.signature is not None:
            names += [f"sig_{idx}" for idx in range(self.signature.m)]
        return names

    def context(self, batch: WindowBatch, mode: Mode = "infer") -> Tensor:
        """The backbone output ``a``, one ``d_model`` row per local-window step."""
        inputs = Tensor(batch.local)
        if self.signature is not None:
            inputs = repeat_context(inputs, self.signature(batch.signature, mode))
        return self.backbone(inputs)

    def forward(self, batch: WindowBatch, mode: Mode = "infer") -> Tensor:
        volumes, _ = self.allocator(self.context(batch, mode), self.config.lookback)
        return volumes

    def loss(self, batch: WindowBatch, mode: Mode = "train") -> Tensor:
        return vwap_loss(self.forward(batch, mode), batch)

    def allocate(
        self, windows: Sequence[SampleWindow], batch_size: int = 256
    ) -> List[AllocationCurve]:
        curves: List[AllocationCurve] = []
        for start in range(0, len(windows), batch_size):
            volumes = self.forward(WindowBatch.stack(windows[start : start + batch_size]))
            curves.extend(AllocationCurve(row.copy()) for row in volumes.numpy())
        return curves

    @classmethod
    def from_store(cls, config: ExperimentConfig, store: ParameterStore) -> "VwapModel":
        """Rebuilds the model for ``config`` and copies the checkpointed values in."""
        seed = int(store.metadata.get("seed", config.seed))
        model = cls(config, seed)
        try:
            model.store.load_from(store)
        except ShapeError as exc:
            raise CheckpointError(f"checkpoint does not fit {config.variant}: {exc}") from exc
        return model
