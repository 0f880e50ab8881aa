"""Optimizers shared by the encoder and task-head training loops."""

from __future__ import annotations

import math
from typing import Dict, Mapping

import numpy as np

from .errors import DimensionError
from .numeric import Tensor


class Adam:
    """Adam with bias correction; state is keyed by parameter name.

    Parameters are immutable tensors, so step() returns replacements
    instead of updating in place. The learning rate may be reassigned
    between steps (cosine schedules do exactly that).
    """

    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}
        self._t = 0

    def step(self, params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray]) -> Dict[str, Tensor]:
        self._t += 1
        b1t = 1.0 - self.beta1 ** self._t
        b2t = 1.0 - self.beta2 ** self._t
        out: Dict[str, Tensor] = {}
        for name, p in params.items():
            g = np.asarray(grads[name], dtype=np.float64)
            if g.shape != p.shape:
                raise DimensionError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
            m = self._m.get(name)
            v = self._v.get(name)
            m = self.beta1 * m + (1.0 - self.beta1) * g if m is not None else (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g if v is not None else (1.0 - self.beta2) * g * g
            self._m[name] = m
            self._v[name] = v
            update = (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            out[name] = Tensor(p.data - self.lr * update, copy=False)
        return out


def cosine_lr(base_lr: float, epoch: int, total_epochs: int, min_lr: float = 0.0) -> float:
    """Cosine-annealed learning rate for the given (0-based) epoch."""
    if total_epochs <= 1:
        return base_lr
    frac = epoch / (total_epochs - 1)
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + math.cos(math.pi * frac))


def sgd_update(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], eta: float) -> Dict[str, Tensor]:
    """Plain gradient step: w <- w - eta * g, for every named parameter."""
    out: Dict[str, Tensor] = {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise DimensionError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        out[name] = Tensor(p.data - eta * g, copy=False)
    return out
