"""Adam optimizer with warmup / linear-to-zero decay and optional decoupled weight decay.

The per-step learning rate is

    lr_t = lr * min(step / warmup_steps, 1) * max(0, 1 - step / total_steps)

with steps counted from 1. Weight decay defaults to the decoupled form
(applied as direct shrinkage scaled by lr_t, outside the moment estimates);
the coupled form (decay folded into the gradient before the moments) is
available behind a flag for comparison runs.
"""

from __future__ import annotations

import numpy as np


def schedule_lr(base_lr: float, step: int, warmup_steps: int, total_steps: int) -> float:
    warm = 1.0 if warmup_steps <= 0 else min(step / warmup_steps, 1.0)
    decay = 1.0 if total_steps <= 0 else max(0.0, 1.0 - step / total_steps)
    return base_lr * warm * decay


class Adam:
    def __init__(
        self,
        params: dict[str, np.ndarray],
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
        warmup_steps: int = 0,
        total_steps: int = 0,
        decoupled_weight_decay: bool = True,
        decay_param_filter=None,
    ):
        if lr <= 0 or not (0 < beta1 < 1) or not (0 < beta2 < 1):
            raise ValueError("learning rate and betas must be positive (betas in (0,1))")
        if warmup_steps < 0:
            raise ValueError(f"warmup_steps must be >= 0, got {warmup_steps}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.warmup_steps = warmup_steps
        self.total_steps = total_steps
        self.decoupled = decoupled_weight_decay
        # biases are conventionally exempt from decay; the filter decides per name
        self.decay_param_filter = decay_param_filter or (lambda name: not name.endswith("b"))
        self.step_count = 0
        self._m = {k: np.zeros_like(v) for k, v in params.items()}
        self._v = {k: np.zeros_like(v) for k, v in params.items()}

    def current_lr(self) -> float:
        return schedule_lr(self.lr, self.step_count, self.warmup_steps, self.total_steps)

    def step(self, grads: dict[str, np.ndarray]) -> float:
        """Apply one update in-place; returns the learning rate used."""
        self.step_count += 1
        t = self.step_count
        lr_t = schedule_lr(self.lr, t, self.warmup_steps, self.total_steps)
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            g = grads[name]
            decayed = self.weight_decay > 0 and self.decay_param_filter(name)
            if decayed and not self.decoupled:
                g = g + self.weight_decay * p
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if decayed and self.decoupled:
                update = update + self.weight_decay * p
            p -= lr_t * update
        return lr_t
