import logging
from dataclasses import dataclass

import numpy as np

from sigvwap.errors import ShapeError
from sigvwap.model.signature_vector import signature_dim
from sigvwap.nn_core import ops
from sigvwap.nn_core.layers import ones, zeros
from sigvwap.nn_core.parameter_store import ParameterStore
from sigvwap.nn_core.tensor import Tensor, as_tensor
from sigvwap.signature.tensor_algebra import signature_coefficients
from sigvwap.types import Mode

logger = logging.getLogger(__name__)

SIGNATURE_NORM_EPS = 0.001
SIGNATURE_NORM_MOMENTUM = 0.99


@dataclass
class SignatureScaler:
    W_sig: Tensor

    @classmethod
    def create(
        cls, store: ParameterStore, l_s: int, d: int, prefix: str = "sig"
    ) -> "SignatureScaler":
        return cls(store.create(f"{prefix}.W_sig", (1, l_s, d), ones))


@dataclass
class SignatureNorm:
    gamma: Tensor
    beta: Tensor
    running_mean: Tensor
    running_var: Tensor
    eps: float = SIGNATURE_NORM_EPS
    momentum: float = SIGNATURE_NORM_MOMENTUM

    @classmethod
    def create(cls, store: ParameterStore, m: int, prefix: str = "sig.norm") -> "SignatureNorm":
        return cls(
            store.create(f"{prefix}.gamma", (m,), ones),
            store.create(f"{prefix}.beta", (m,), zeros),
            store.create(f"{prefix}.running_mean", (m,), zeros, trainable=False),
            store.create(f"{prefix}.running_var", (m,), ones, trainable=False),
        )


def scale_path(scaler: SignatureScaler, X) -> Tensor:
    X = as_tensor(X)
    if X.shape[-2:] != scaler.W_sig.shape[-2:]:
        raise ShapeError(f"path {X.shape} does not match scaling kernel {scaler.W_sig.shape}")
    return ops.mul(scaler.W_sig, X)


def normalize_signature(s, norm: SignatureNorm, mode: Mode = "infer") -> Tensor:
    """
    Batch normalization of signature vectors ``s`` of shape ``(B, m)``.

    In train mode the batch statistics are used and the running statistics
    move towards them by ``1 - momentum``; in infer mode only the running
    statistics are read.
    """
    s = as_tensor(s)
    if mode == "train":
        if s.shape[0] < 2:
            raise ShapeError(f"train-mode normalization needs a batch of >= 2, got {s.shape[0]}")
        out, batch_mean, batch_var = ops.batch_norm_op(s, norm.gamma, norm.beta, norm.eps)
        norm.running_mean.value[...] = (
            norm.momentum * norm.running_mean.value + (1.0 - norm.momentum) * batch_mean
        )
        norm.running_var.value[...] = (
            norm.momentum * norm.running_var.value + (1.0 - norm.momentum) * batch_var
        )
        return out

    inv_std = 1.0 / np.sqrt(norm.running_var.value + norm.eps)
    centred = ops.sub(s, norm.running_mean.value)
    return ops.add(ops.mul(ops.mul(centred, inv_std), norm.gamma), norm.beta)


def repeat_context(Z, s_hat) -> Tensor:
    """Appends ``s_hat`` (``(m,)`` or ``(B, m)``) to every row of ``Z`` (``(T, d)``
    or ``(B, T, d)``).
    """
    Z, s_hat = as_tensor(Z), as_tensor(s_hat)
    m = s_hat.shape[-1]
    if m == 0:
        return Z
    T = Z.shape[-2]
    lifted = ops.reshape(s_hat, s_hat.shape[:-1] + (1, m))
    rows = ops.mul(lifted, np.ones((T, 1)))
    out = ops.concat([Z, rows], axis=-1)
    assert out.shape[-1] == Z.shape[-1] + m, out.shape
    return out


class SignatureFeatures:
    """Scale → truncated signature → batch normalization, one vector per sample."""

    def __init__(self, store: ParameterStore, l_s: int, d: int, depth: int):
        self.l_s = l_s
        self.d = d
        self.depth = depth
        self.m = signature_dim(d, depth)
        self.scaler = SignatureScaler.create(store, l_s, d)
        self.norm = SignatureNorm.create(store, self.m)

    def __call__(self, signature_windows, mode: Mode = "infer") -> Tensor:
        scaled = scale_path(self.scaler, signature_windows)
        raw = signature_coefficients(scaled, self.depth)
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug("signature batch mean |s| = %.4g", float(np.abs(raw.value).mean()))
        return normalize_signature(raw, self.norm, mode)
