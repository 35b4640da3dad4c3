"""Finite-difference verification of analytic gradients."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def max_relative_error(loss_fn: Callable[[], float],
                       params: Sequence[np.ndarray],
                       analytic_grads: Sequence[np.ndarray],
                       eps: float = 1e-5) -> float:
    """Worst relative error between analytic gradients and central finite
    differences, over every entry of every parameter array.

    ``loss_fn`` must recompute the scalar loss from the current parameter
    values; parameters are perturbed in place and restored.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    worst = 0.0
    for param, grad in zip(params, analytic_grads):
        flat = param.reshape(-1)
        grad_flat = np.asarray(grad).reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + eps
            hi = loss_fn()
            flat[idx] = original - eps
            lo = loss_fn()
            flat[idx] = original
            numeric = (hi - lo) / (2.0 * eps)
            denom = max(abs(numeric) + abs(grad_flat[idx]), 1e-8)
            worst = max(worst, abs(numeric - grad_flat[idx]) / denom)
    return worst
