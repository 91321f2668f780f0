"""Central finite-difference verification of analytic gradients.

Only meaningful in float64; callers build their inputs as float64 tensors.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def finite_difference_check(op, inputs: list[Tensor], h: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    `op` maps the input tensors to a single Tensor (any shape); the check
    contracts the output with a fixed random projection so the full Jacobian
    action is exercised. Gradients are checked w.r.t. every input that has
    requires_grad set.
    """
    for t in inputs:
        if t.data.dtype != np.float64:
            raise ValueError("finite_difference_check requires float64 inputs")

    rng = np.random.default_rng(seed)
    out = op(*inputs)
    proj = rng.standard_normal(out.data.shape)

    def scalar():
        return float((op(*inputs).data * proj).sum())

    for t in inputs:
        t.grad = None
    (out * Tensor(proj, dtype=np.float64)).sum().backward()

    max_rel = 0.0
    for t in inputs:
        if not t.requires_grad:
            continue
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        aflat = np.asarray(analytic).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = scalar()
            flat[i] = orig - h
            fm = scalar()
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * h)
            denom = max(1.0, abs(aflat[i]), abs(numeric))
            max_rel = max(max_rel, abs(aflat[i] - numeric) / denom)
    return max_rel
