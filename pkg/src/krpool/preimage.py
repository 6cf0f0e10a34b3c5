"""Kernelized rank pooling through input-space pre-images.

Both variants pool a sequence into a vector ``z`` whose RBF similarities
``k(x_i, z)`` increase with time. The basic variant regularizes ``||z||``;
the improved one keeps ``z`` close to the frames instead.

Per-pair slacks are not optimized explicitly. For a hinge argument ``v``,
``min_{xi >= 0} C*xi + lam*max(0, v - xi) = min(C, lam) * max(0, v)``, so the
slacked problem is the unslacked one with hinge weight ``min(C, lam)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._descent import armijo_descent
from .descriptors import PreimageDescriptor
from .errors import ParamError, ShapeError
from .kernel import bandwidth
from .linrank import hinge_sum, order_satisfaction, violation_counts
from .seqdata import as_frames

VARIANTS = ("bkrp", "ibkrp")
INITS = ("zero", "mean", "first-frame", "last-frame", "given")


@dataclass(frozen=True)
class PreimageParams:
    eta: float = 0.01
    lam: float = 1.0
    slack_weight: float = 1.0
    sigma: float | None = None  # None: per-sequence bandwidth rule
    max_iters: int = 500
    tol: float = 1e-6
    step: float = 1.0
    init: str | None = None  # None: zero for bkrp, mean for ibkrp
    z0: np.ndarray | None = None
    use_slack: bool = True
    multistart: bool = False

    def __post_init__(self):
        if not self.eta > 0:
            raise ParamError("eta must be positive")
        if not (self.lam >= 0 and self.slack_weight > 0):
            raise ParamError("lambda must be >= 0 and C > 0")
        if self.sigma is not None and not self.sigma > 0:
            raise ParamError("sigma must be positive")
        if self.init is not None and self.init not in INITS:
            raise ParamError(f"init must be one of {INITS}")
        if self.init == "given" and self.z0 is None:
            raise ParamError("init='given' needs z0")

    @property
    def hinge_weight(self):
        return min(self.slack_weight, self.lam) if self.use_slack else self.lam


def _setup(z, X, p):
    F = as_frames(X)
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (F.shape[1],):
        raise ShapeError(f"z has shape {z.shape}, frames have d={F.shape[1]}")
    sigma = bandwidth(F) if p.sigma is None else p.sigma
    if not sigma > 0:
        raise ParamError("sigma must be positive")
    return z, F, sigma


def kernel_scores(z, F, sigma):
    diff = F - z
    return np.exp(-np.einsum("ij,ij->i", diff, diff) / (2.0 * sigma * sigma))


def bkrp_objective(z, X, p=PreimageParams()):
    z, F, sigma = _setup(z, X, p)
    return 0.5 * float(z @ z) + p.lam * hinge_sum(kernel_scores(z, F, sigma), p.eta)


def ibkrp_objective(z, X, p=PreimageParams()):
    z, F, sigma = _setup(z, X, p)
    diff = F - z
    data = 0.5 * float(np.einsum("ij,ij->", diff, diff))
    return data + p.hinge_weight * hinge_sum(kernel_scores(z, F, sigma), p.eta)


def preimage_objective(z, X, p=PreimageParams(), variant="ibkrp"):
    if variant == "bkrp":
        return bkrp_objective(z, X, p)
    if variant == "ibkrp":
        return ibkrp_objective(z, X, p)
    raise ParamError(f"unknown variant {variant!r}")


def preimage_grad(z, X, p=PreimageParams(), variant="ibkrp"):
    z, F, sigma = _setup(z, X, p)
    k = kernel_scores(z, F, sigma)
    coef = violation_counts(k, p.eta) * k
    # d k(x, z) / dz = k(x, z) (x - z) / sigma^2
    hinge = (F - z).T @ coef / (sigma * sigma)
    if variant == "bkrp":
        return z + p.lam * hinge
    if variant == "ibkrp":
        return F.shape[0] * z - F.sum(axis=0) + p.hinge_weight * hinge
    raise ParamError(f"unknown variant {variant!r}")


def _initial_point(F, p, variant, how):
    if how is None:
        how = "zero" if variant == "bkrp" else "mean"
    if how == "zero":
        return np.zeros(F.shape[1])
    if how == "mean":
        return F.mean(axis=0)
    if how == "first-frame":
        return F[0].copy()
    if how == "last-frame":
        return F[-1].copy()
    return np.asarray(p.z0, dtype=np.float64).copy()


def preimage_fit(X, p=PreimageParams(), variant="ibkrp"):
    if variant not in VARIANTS:
        raise ParamError(f"unknown variant {variant!r}")
    F = as_frames(X)
    sigma = bandwidth(F) if p.sigma is None else p.sigma
    p = replace(p, sigma=sigma)
    starts = [p.init]
    if p.multistart:
        starts = [None, "first-frame", "last-frame"]
    best = None
    for how in starts:
        res = armijo_descent(
            lambda z: preimage_objective(z, F, p, variant),
            lambda z: preimage_grad(z, F, p, variant),
            _initial_point(F, p, variant, how),
            max_iters=p.max_iters,
            tol=p.tol,
            step=p.step,
        )
        if best is None or res.value < best.value:
            best = res
    return PreimageDescriptor(
        best.x,
        variant,
        eta=p.eta,
        lam=p.lam,
        slack_weight=p.slack_weight if p.use_slack else float("inf"),
        sigma=sigma,
        iterations=best.iterations,
        objective=best.value,
    )


def preimage_order_rate(desc, X, eta=None):
    """Fraction of pairs i < j with ``k(x_i, z) + eta <= k(x_j, z)``."""
    F = as_frames(X)
    eta = desc.eta if eta is None else eta
    return order_satisfaction(kernel_scores(desc.z, F, desc.sigma), eta)
