"""AdamW with decoupled weight decay and per-parameter learning-rate multipliers."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class NonFiniteGradientError(RuntimeError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"non-finite gradient for parameter {name!r}")


class AdamW:
    """Decoupled-weight-decay Adam over a named parameter dict.

    ``lr_multipliers`` maps parameter names to a scalar applied on top of the
    global learning rate (used to train the offset / attention-weight
    projections 10x slower than the rest of the network).
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 2e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 1e-4,
        lr_multipliers: dict[str, float] | None = None,
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.lr_multipliers = dict(lr_multipliers or {})
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(name)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            lr_eff = self.lr * self.lr_multipliers.get(name, 1.0)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data -= lr_eff * (update + self.weight_decay * p.data)
