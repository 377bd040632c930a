"""Central finite-difference validation of analytic gradients.

Samples parameter coordinates uniformly at random (seeded) across all
parameter tensors, perturbs each by ±eps, and compares the numerical slope
against the analytic gradient with the scale-robust relative error
|g_a - g_n| / max(|g_a|, |g_n|, 1e-8). Stochastic layers (dropout) stay off:
the loss is evaluated in deterministic mode throughout.
"""

from __future__ import annotations

import numpy as np


def gradient_check(model, batch, eps: float = 1e-4, n_samples: int = 120, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients."""
    if n_samples < 100:
        raise ValueError(f"need >= 100 sampled parameters, got {n_samples}")
    _, grads = model.loss_and_grads(batch, train=False)
    names = sorted(model.params)
    sizes = np.array([model.params[k].size for k in names])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_samples, total), replace=False)
    bounds = np.cumsum(sizes)

    worst = 0.0
    for flat_idx in picks:
        which = int(np.searchsorted(bounds, flat_idx, side="right"))
        local = int(flat_idx - (bounds[which - 1] if which else 0))
        param = model.params[names[which]]
        coord = np.unravel_index(local, param.shape)
        orig = param[coord]
        param[coord] = orig + eps
        loss_plus = model.loss(batch)
        param[coord] = orig - eps
        loss_minus = model.loss(batch)
        param[coord] = orig
        g_num = (loss_plus - loss_minus) / (2.0 * eps)
        g_ana = grads[names[which]][coord]
        rel = abs(g_ana - g_num) / max(abs(g_ana), abs(g_num), 1e-8)
        worst = max(worst, rel)
    return worst
