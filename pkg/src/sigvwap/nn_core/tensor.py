import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from sigvwap.errors import ShapeError

logger = logging.getLogger(__name__)

DTYPE = np.float64

# Turned on by the test-suite; every recorded value is then checked for NaN/inf.
CHECK_FINITE = False


def set_check_finite(enabled: bool) -> None:
    global CHECK_FINITE  # pylint: disable=global-statement
    CHECK_FINITE = enabled


class Tensor:
    """
    A shaped float64 array plus an optional gradient slot.

    Parameters live in a ParameterStore as leaf tensors with ``requires_grad``;
    everything produced by a primitive while a DiffRecord is active is an
    interior node of that record.
    """

    __slots__ = ("value", "grad", "requires_grad", "name", "record")

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        name: Optional[str] = None,
    ):
        self.value: np.ndarray = np.asarray(value, dtype=DTYPE)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self.record: Optional["DiffRecord"] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def numpy(self) -> np.ndarray:
        return self.value

    def item(self) -> float:
        return float(self.value.reshape(-1)[0])

    def __len__(self) -> int:
        return self.value.shape[0]

    def __repr__(self):
        label = f"name={self.name}, " if self.name else ""
        return f"Tensor({label}shape={self.shape})"


VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class RecordEntry:
    op: str
    output: Tensor
    inputs: Tuple[Tensor, ...]
    vjp: VJP


class DiffRecord:
    """
    Ordered log of primitive applications. Entries are appended in execution
    order, which is a topological order of the graph; the reverse sweep walks
    it backwards and therefore visits every node once, after all its consumers.
    """

    def __init__(self):
        self.entries: List[RecordEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, entry: RecordEntry) -> None:
        self.entries.append(entry)

    def __repr__(self):
        return "\n".join(
            f"{idx}: {entry.op} -> {entry.output.shape}"
            for idx, entry in enumerate(self.entries)
        )


# one recording stack per thread
_LOCAL = threading.local()


def _stack() -> List[DiffRecord]:
    if not hasattr(_LOCAL, "stack"):
        _LOCAL.stack = []
    return _LOCAL.stack


def active_record() -> Optional[DiffRecord]:
    stack = _stack()
    return stack[-1] if stack else None


@contextmanager
def recording(record: Optional[DiffRecord] = None) -> Iterator[DiffRecord]:
    """Context manager that records primitive applications into ``record``."""
    record = record if record is not None else DiffRecord()
    stack = _stack()
    stack.append(record)
    try:
        yield record
    finally:
        stack.pop()


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def record_op(
    op: str,
    value: np.ndarray,
    inputs: Sequence[Tensor],
    vjp: VJP,
) -> Tensor:
    out = Tensor(value)
    if CHECK_FINITE:
        assert np.all(np.isfinite(out.value)), f"non-finite output of {op}"

    record = active_record()
    if record is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.record = record
        record.append(RecordEntry(op, out, tuple(inputs), vjp))
    return out


def backward(loss: Tensor, store: "Optional[object]" = None) -> Dict[str, np.ndarray]:
    """
    Reverse sweep from a scalar ``loss``.

    Gradients are accumulated into the ``grad`` slot of every leaf tensor that
    requires a gradient. When a ParameterStore is given its gradients are zeroed
    first, so parameters the loss does not reach end up with a zero gradient.
    Returns ``{name: grad}`` for the store's trainable parameters.
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")

    if store is not None:
        store.zero_grad()

    record = loss.record
    if record is not None:
        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
        for entry in reversed(record.entries):
            grad_out = grads.pop(id(entry.output), None)
            if grad_out is None:
                continue
            for tensor, grad_in in zip(entry.inputs, entry.vjp(grad_out)):
                if grad_in is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if tensor.record is None:
                    # leaf
                    if tensor.grad is None:
                        tensor.grad = np.zeros_like(tensor.value)
                    tensor.grad += grad_in
                elif key in grads:
                    grads[key] = grads[key] + grad_in
                else:
                    grads[key] = grad_in

    if store is None:
        return {}
    return store.gradients()
