"""Central finite-difference gradient checking."""
from __future__ import annotations

from typing import Callable, Dict, Tuple

import numpy as np

LossFn = Callable[[Dict[str, np.ndarray]], Tuple[float, Dict[str, np.ndarray]]]


def rel_error(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def grad_check(loss_fn: LossFn, params: Dict[str, np.ndarray], epsilon: float = 1e-5,
               names=None, max_entries: int | None = None, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(params) -> (loss, grads)``. Parameters are promoted to float64
    so truncation, not rounding, dominates the finite difference. With
    ``max_entries`` only that many randomly chosen entries per tensor are
    probed.
    """
    p64 = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    _, grads = loss_fn(p64)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in sorted(names or grads):
        p = p64[name]
        flat = p.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, size=max_entries, replace=False)
        analytic = np.asarray(grads[name], dtype=np.float64).reshape(-1)
        for j in idx:
            old = flat[j]
            flat[j] = old + epsilon
            lp, _ = loss_fn(p64)
            flat[j] = old - epsilon
            lm, _ = loss_fn(p64)
            flat[j] = old
            numeric = (lp - lm) / (2 * epsilon)
            worst = max(worst, float(rel_error(analytic[j], numeric)))
    return worst
