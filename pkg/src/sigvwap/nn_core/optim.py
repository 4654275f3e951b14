import logging
import math
from dataclasses import dataclass

import numpy as np

from sigvwap.nn_core.parameter_store import ParameterStore

logger = logging.getLogger(__name__)


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    step_count: int = 0

    def step(self, store: ParameterStore) -> None:
        """One bias-corrected Adam update of every trainable array, in place."""
        self.step_count += 1
        correction1 = 1.0 - self.beta1**self.step_count
        correction2 = 1.0 - self.beta2**self.step_count
        for name, tensor in store.trainable():
            grad = tensor.grad
            if grad is None:
                continue
            slots = store.slots(name)
            m = slots.setdefault("m", np.zeros_like(tensor.value))
            v = slots.setdefault("v", np.zeros_like(tensor.value))
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / correction1
            v_hat = v / correction2
            tensor.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(store: ParameterStore, optimizer: Adam) -> ParameterStore:
    optimizer.step(store)
    return store


@dataclass
class PlateauSchedule:
    """Halves the learning rate after ``patience`` epochs without validation improvement."""

    patience: int = 5
    factor: float = 0.5
    min_lr: float = 1e-6
    best: float = math.inf
    wait: int = 0

    def update(self, optimizer: Adam, val_loss: float) -> bool:
        if val_loss < self.best:
            self.best = val_loss
            self.wait = 0
            return False
        self.wait += 1
        if self.wait < self.patience:
            return False
        self.wait = 0
        new_lr = max(optimizer.lr * self.factor, self.min_lr)
        if new_lr < optimizer.lr:
            logger.info("Validation plateau: lr %.3g -> %.3g", optimizer.lr, new_lr)
            optimizer.lr = new_lr
            return True
        return False
