import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from sigvwap.nn_core.tensor import Tensor, backward, recording

logger = logging.getLogger(__name__)

FD_STEP = 1e-6
# Central differences at FD_STEP carry about 1e-9 of roundoff for losses of order 10;
# gradients smaller than GRAD_FLOOR are compared on that absolute scale.
GRAD_FLOOR = 1e-4


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    worst_index: tuple

    def as_dict(self):
        return {
            "name": self.name,
            "max_rel_error": self.max_rel_error,
            "worst_index": self.worst_index,
        }


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), GRAD_FLOOR)
    return np.abs(analytic - numeric) / scale


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Dict[str, Tensor],
    step: float = FD_STEP,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Dict[str, GradCheckResult]:
    """
    Compares reverse-mode gradients of the scalar ``loss_fn()`` against central
    finite differences for every tensor in ``params``.

    ``loss_fn`` is re-evaluated for each perturbed entry, so it must read the
    parameter values afresh on each call. ``max_entries`` limits the number of
    entries checked per tensor (sampled with ``rng``).
    """
    for tensor in params.values():
        tensor.grad = None
    with recording():
        loss = loss_fn()
    backward(loss)
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.value))
        for name, t in params.items()
    }

    rng = rng if rng is not None else np.random.default_rng(0)
    results = {}
    for name, tensor in params.items():
        indices: Sequence[tuple] = list(np.ndindex(tensor.shape))
        if max_entries is not None and len(indices) > max_entries:
            picks = rng.choice(len(indices), size=max_entries, replace=False)
            indices = [indices[i] for i in sorted(picks)]

        worst, worst_index = 0.0, ()
        for index in indices:
            original = tensor.value[index]
            tensor.value[index] = original + step
            plus = loss_fn().item()
            tensor.value[index] = original - step
            minus = loss_fn().item()
            tensor.value[index] = original
            numeric = (plus - minus) / (2.0 * step)
            error = float(_relative_error(analytic[name][index], np.asarray(numeric)))
            if error > worst:
                worst, worst_index = error, index
        results[name] = GradCheckResult(name, worst, worst_index)
        logger.debug("gradcheck %s: max rel error %.3g at %s", name, worst, worst_index)
    return results


def max_error(results: Dict[str, GradCheckResult]) -> float:
    return max((r.max_rel_error for r in results.values()), default=0.0)
