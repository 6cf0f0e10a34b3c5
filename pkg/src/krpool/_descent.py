"""(Sub)gradient descent with Armijo backtracking for vector problems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_STEP = 1e-16


@dataclass
class DescentResult:
    x: np.ndarray
    value: float
    iterations: int
    trace: list
    stalled: bool = False
    grad_norm: float = float("nan")


def armijo_descent(fun, grad, x0, max_iters=500, tol=1e-6, step=1.0, c1=1e-4):
    """Minimize ``fun`` from ``x0``; returns the best iterate seen.

    Trial steps start at twice the last accepted step and are halved until the
    sufficient-decrease test passes, so accepted values never increase.
    """
    x = np.array(x0, dtype=np.float64)
    fx = fun(x)
    trace = [fx]
    t = step
    stalled = False
    gnorm = float("nan")
    it = 0
    for it in range(1, max_iters + 1):
        g = grad(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            break
        slope = gnorm * gnorm
        while True:
            trial = x - t * g
            ft = fun(trial)
            if ft <= fx - c1 * t * slope:
                break
            t *= 0.5
            if t < MIN_STEP:
                stalled = True
                break
        if stalled:
            break
        x, fx = trial, ft
        trace.append(fx)
        t = min(2.0 * t, 1e8)
    return DescentResult(x, fx, it, trace, stalled, gnorm)
