"""Classical momentum SGD."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import ShapeMismatch


@dataclass
class MomentumSGD:
    lr: float = 0.1
    momentum: float = 0.9
    clip_norm: float | None = None
    velocity: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")

    def step(self, params: dict, grads: dict | None = None) -> None:
        """v <- mu v - lr g ; theta <- theta + v, in place; zeroes ``.grad`` afterwards.

        ``params`` maps names to Tensors; gradients default to each tensor's ``.grad``.
        Parameters without a gradient still move by their velocity.
        """
        if grads is None:
            grads = {k: p.grad for k, p in params.items()}
        scale = 1.0
        if self.clip_norm is not None:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values() if g is not None))
            if norm > self.clip_norm:
                scale = self.clip_norm / norm
        for name, p in params.items():
            g = grads.get(name)
            if g is not None and g.shape != p.data.shape:
                raise ShapeMismatch(f"gradient for {name} has shape {g.shape}, parameter {p.data.shape}")
            v = self.velocity.get(name)
            if v is None:
                if g is None:
                    continue
                v = np.zeros_like(p.data)
            v *= self.momentum
            if g is not None:
                v -= self.lr * scale * g
            self.velocity[name] = v
            p.data += v
            p.grad = None


def sgd_step(params: dict, grads: dict, opt: MomentumSGD) -> dict:
    opt.step(params, grads)
    return params
