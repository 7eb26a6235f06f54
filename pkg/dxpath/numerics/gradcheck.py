"""
Finite-difference gradient checking.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Parameter, Tape, Tensor, backward


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: Optional[str]
    worst_index: Optional[int]
    checked: int

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error < tol


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    rng: Optional[np.random.Generator] = None,
    samples_per_param: int = 6,
    h: float = 1e-5,
    floor: float = 1e-3,
) -> GradCheckReport:
    """
    Compare tape gradients of `loss_fn` against central differences.

    `loss_fn` must rebuild the loss from scratch on every call. The relative
    error of one entry is |a - n| / max(floor, |a| + |n|).

    Args:
        loss_fn: Zero-argument function returning a scalar Tensor
        params: Parameters to check
        rng: Generator used to sample entries; all entries when None
        samples_per_param: Entries sampled per parameter
        h: Finite-difference step
        floor: Lower bound on the error denominator

    Returns:
        GradCheckReport with the worst entry found
    """
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    backward(tape, loss)
    analytic = [p.grad.copy() for p in params]

    worst = GradCheckReport(0.0, None, None, 0)
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        if rng is None or flat.size <= samples_per_param:
            indices = range(flat.size)
        else:
            indices = sorted(rng.choice(flat.size, size=samples_per_param, replace=False))
        for idx in indices:
            original = flat[idx]
            flat[idx] = original + h
            up = loss_fn().item()
            flat[idx] = original - h
            down = loss_fn().item()
            flat[idx] = original
            numeric = (up - down) / (2.0 * h)
            a = float(grad.reshape(-1)[idx])
            rel = abs(a - numeric) / max(floor, abs(a) + abs(numeric))
            worst.checked += 1
            if rel > worst.max_rel_error:
                worst.max_rel_error = rel
                worst.worst_param = getattr(p, "name", None)
                worst.worst_index = int(idx)
    return worst
