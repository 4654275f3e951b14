"""
Differentiable primitives over :class:`Tensor`.

Every function computes its forward value with numpy and hands a closure that
maps the output cotangent to input cotangents to :func:`record_op`. Elementwise
binary ops follow numpy broadcasting; their cotangents are summed back to the
input shapes by :func:`_unbroadcast`.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from sigvwap.errors import ShapeError
from sigvwap.nn_core.tensor import Tensor, as_tensor, record_op

Operand = Union[Tensor, np.ndarray, float, int]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# Arithmetic


def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record_op(
        "add",
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record_op(
        "sub",
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record_op(
        "mul",
        a.value * b.value,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.value, a.shape),
            _unbroadcast(g * a.value, b.shape),
        ),
    )


def div(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value / b.value
    return record_op(
        "div",
        out,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.value, a.shape),
            _unbroadcast(-g * out / b.value, b.shape),
        ),
    )


def neg(a: Operand) -> Tensor:
    a = as_tensor(a)
    return record_op("neg", -a.value, (a,), lambda g: (-g,))


def matmul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs ≥2-d operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"inner extents differ: {a.shape} @ {b.shape}")

    def vjp(g):
        grad_a = g @ np.swapaxes(b.value, -1, -2)
        grad_b = np.swapaxes(a.value, -1, -2) @ g
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return record_op("matmul", a.value @ b.value, (a, b), vjp)


def outer(a: Operand, b: Operand) -> Tensor:
    """Outer product over the last axis, flattened row-major: (..., p) x (..., q) -> (..., p*q)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[:-1] != b.shape[:-1]:
        raise ShapeError(f"outer needs equal leading shapes, got {a.shape}, {b.shape}")
    p, q = a.shape[-1], b.shape[-1]
    value = (a.value[..., :, None] * b.value[..., None, :]).reshape(a.shape[:-1] + (p * q,))

    def vjp(g):
        g3 = g.reshape(g.shape[:-1] + (p, q))
        return (
            np.einsum("...pq,...q->...p", g3, b.value),
            np.einsum("...pq,...p->...q", g3, a.value),
        )

    return record_op("outer", value, (a, b), vjp)


# Shape manipulation


def reshape(a: Operand, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    return record_op(
        "reshape", a.value.reshape(tuple(shape)), (a,), lambda g: (g.reshape(a.shape),)
    )


def transpose(a: Operand, axes: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return record_op(
        "transpose",
        np.transpose(a.value, axes),
        (a,),
        lambda g: (np.transpose(g, inverse),),
    )


def _is_basic_index(key) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(p, (int, slice, type(Ellipsis), type(None))) for p in parts)


def getitem(a: Operand, key) -> Tensor:
    a = as_tensor(a)
    basic = _is_basic_index(key)

    def vjp(g):
        grad = np.zeros_like(a.value)
        if basic:
            grad[key] = g
        else:
            np.add.at(grad, key, g)
        return (grad,)

    return record_op("getitem", a.value[key], (a,), vjp)


def concat(tensors: Sequence[Operand], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def vjp(g):
        return [
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
            for i in range(len(tensors))
        ]

    return record_op(
        "concat", np.concatenate([t.value for t in tensors], axis=axis), tensors, vjp
    )


def stack(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]

    def vjp(g):
        return [np.take(g, i, axis=axis) for i in range(len(tensors))]

    return record_op("stack", np.stack([t.value for t in tensors], axis=axis), tensors, vjp)


# Reductions


def sum_(a: Operand, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims=False) -> Tensor:
    a = as_tensor(a)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return record_op("sum", a.value.sum(axis=axis, keepdims=keepdims), (a,), vjp)


def mean(a: Operand, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    count = a.value.size if axis is None else int(np.prod(np.array(a.shape)[np.atleast_1d(axis)]))
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


# Elementwise non-linearities


def exp(a: Operand) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.value)
    return record_op("exp", out, (a,), lambda g: (g * out,))


def log(a: Operand) -> Tensor:
    a = as_tensor(a)
    return record_op("log", np.log(a.value), (a,), lambda g: (g / a.value,))


def tanh(a: Operand) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.value)
    return record_op("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Operand) -> Tensor:
    a = as_tensor(a)
    # exp of -|x| only, so large inputs never overflow
    e = np.exp(-np.abs(a.value))
    out = np.where(a.value >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return record_op("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a: Operand) -> Tensor:
    a = as_tensor(a)
    mask = a.value > 0
    return record_op("relu", np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def elu(a: Operand, alpha: float = 1.0) -> Tensor:
    a = as_tensor(a)
    positive = a.value > 0
    negative_part = alpha * np.expm1(np.minimum(a.value, 0.0))
    out = np.where(positive, a.value, negative_part)
    return record_op(
        "elu", out, (a,), lambda g: (g * np.where(positive, 1.0, negative_part + alpha),)
    )


def abs_(a: Operand) -> Tensor:
    a = as_tensor(a)
    return record_op("abs", np.abs(a.value), (a,), lambda g: (g * np.sign(a.value),))


def square(a: Operand) -> Tensor:
    a = as_tensor(a)
    return record_op("square", a.value * a.value, (a,), lambda g: (2.0 * g * a.value,))


def minimum(a: Operand, b: Operand) -> Tensor:
    """Elementwise min; on ties the cotangent goes to ``b`` (the cap)."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.value < b.value
    return record_op(
        "minimum",
        np.where(take_a, a.value, b.value),
        (a, b),
        lambda g: (
            _unbroadcast(g * take_a, a.shape),
            _unbroadcast(g * ~take_a, b.shape),
        ),
    )


def maximum(a: Operand, b: Operand) -> Tensor:
    """Elementwise max; on ties the cotangent goes to ``b`` (the floor)."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.value > b.value
    return record_op(
        "maximum",
        np.where(take_a, a.value, b.value),
        (a, b),
        lambda g: (
            _unbroadcast(g * take_a, a.shape),
            _unbroadcast(g * ~take_a, b.shape),
        ),
    )


def clip(a: Operand, low: Operand, high: Operand) -> Tensor:
    return minimum(maximum(a, low), high)


# Fused normalisations


def softmax(a: Operand, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Softmax along ``axis``. ``mask`` is an additive 0/-inf array broadcast
    against ``a``; masked entries get exactly zero weight.
    """
    a = as_tensor(a)
    logits = a.value if mask is None else a.value + mask
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return record_op("softmax", out, (a,), vjp)


def layer_norm_op(x: Operand, gamma: Operand, beta: Operand, eps: float) -> Tensor:
    """Normalises over the last axis; ``gamma``/``beta`` broadcast against it."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    mu = x.value.mean(axis=-1, keepdims=True)
    centred = x.value - mu
    var = (centred * centred).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centred * inv_std
    n = x.shape[-1]

    def vjp(g):
        g_hat = g * gamma.value
        grad_x = inv_std * (
            g_hat
            - g_hat.mean(axis=-1, keepdims=True)
            - x_hat * (g_hat * x_hat).sum(axis=-1, keepdims=True) / n
        )
        return (
            grad_x,
            _unbroadcast(g * x_hat, gamma.shape),
            _unbroadcast(g, beta.shape),
        )

    return record_op("layer_norm", gamma.value * x_hat + beta.value, (x, gamma, beta), vjp)


def batch_norm_op(
    x: Operand, gamma: Operand, beta: Operand, eps: float
) -> Tuple[Tensor, np.ndarray, np.ndarray]:
    """
    Training-mode batch normalisation over axis 0. Returns the output and the
    (biased) batch mean and variance so callers can update running statistics.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    n = x.shape[0]
    mu = x.value.mean(axis=0)
    centred = x.value - mu
    var = (centred * centred).mean(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centred * inv_std

    def vjp(g):
        g_hat = g * gamma.value
        grad_x = inv_std * (
            g_hat - g_hat.mean(axis=0) - x_hat * (g_hat * x_hat).sum(axis=0) / n
        )
        return (
            grad_x,
            _unbroadcast(g * x_hat, gamma.shape),
            _unbroadcast(g, beta.shape),
        )

    out = record_op("batch_norm", gamma.value * x_hat + beta.value, (x, gamma, beta), vjp)
    return out, mu, var


# B-spline basis


def _cox_de_boor(x: np.ndarray, knots: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Returns the order-``order`` bases and the order-``order - 1`` bases at ``x``."""
    xe = x[..., None]
    bases = ((xe >= knots[:-1]) & (xe < knots[1:])).astype(x.dtype)
    for k in range(1, order + 1):
        lower = bases
        left = (xe - knots[: -(k + 1)]) / (knots[k:-1] - knots[: -(k + 1)]) * bases[..., :-1]
        right = (knots[k + 1 :] - xe) / (knots[k + 1 :] - knots[1:-k]) * bases[..., 1:]
        bases = left + right
    return bases, lower


def bspline_basis(x: Operand, knots: np.ndarray, order: int = 3) -> Tensor:
    """
    Evaluates the ``len(knots) - order - 1`` B-spline bases of the given order at
    every entry of ``x``; output shape is ``x.shape + (n_bases,)``. Bases vanish
    outside ``[knots[0], knots[-1])``.
    """
    x = as_tensor(x)
    bases, lower = _cox_de_boor(x.value, knots, order)

    def vjp(g):
        # d/dx B_{i,k} = k/(t_{i+k}-t_i) B_{i,k-1} - k/(t_{i+k+1}-t_{i+1}) B_{i+1,k-1}
        left = order / (knots[order:-1] - knots[: -(order + 1)]) * lower[..., :-1]
        right = order / (knots[order + 1 :] - knots[1:-order]) * lower[..., 1:]
        return ((g * (left - right)).sum(axis=-1),)

    return record_op("bspline_basis", bases, (x,), vjp)


# Operator sugar on Tensor, the way numpy arrays read.
Tensor.__add__ = add  # type: ignore[assignment]
Tensor.__radd__ = lambda self, other: add(other, self)  # type: ignore[assignment]
Tensor.__sub__ = sub  # type: ignore[assignment]
Tensor.__rsub__ = lambda self, other: sub(other, self)  # type: ignore[assignment]
Tensor.__mul__ = mul  # type: ignore[assignment]
Tensor.__rmul__ = lambda self, other: mul(other, self)  # type: ignore[assignment]
Tensor.__truediv__ = div  # type: ignore[assignment]
Tensor.__neg__ = neg  # type: ignore[assignment]
Tensor.__matmul__ = matmul  # type: ignore[assignment]
Tensor.__getitem__ = getitem  # type: ignore[assignment]
