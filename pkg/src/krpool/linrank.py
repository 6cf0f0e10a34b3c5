"""Baseline poolers: frame averaging and linear rank pooling (rank-SVM)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._descent import armijo_descent
from .descriptors import PreimageDescriptor
from .errors import ParamError, ShapeError
from .seqdata import as_frames


@dataclass(frozen=True)
class RankParams:
    eta: float = 0.01
    lam: float = 1.0
    max_iters: int = 500
    tol: float = 1e-6
    step: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ParamError("eta must be positive")
        if not self.lam >= 0:
            raise ParamError("lambda must be non-negative")
        if self.max_iters < 1 or not self.tol > 0 or not self.step > 0:
            raise ParamError("max_iters, tol and step must be positive")


def pair_violations(scores, eta):
    """Strict upper-triangle matrix of ``eta + s_i - s_j`` for i < j."""
    s = np.asarray(scores, dtype=np.float64)
    M = eta + s[:, None] - s[None, :]
    return np.triu(M, k=1), np.triu(np.ones_like(M, dtype=bool), k=1)


def hinge_sum(scores, eta):
    M, upper = pair_violations(scores, eta)
    return float(np.sum(np.maximum(M[upper], 0.0)))


def violation_counts(scores, eta):
    """Net multiplicity of each frame in the violated pairs.

    Entry i is (#violated pairs where i comes first) minus (#where it comes
    second); kinks (argument exactly 0) count as satisfied.
    """
    M, upper = pair_violations(scores, eta)
    viol = upper & (M > 0)
    return viol.sum(axis=1).astype(np.float64) - viol.sum(axis=0)


def order_satisfaction(scores, eta):
    """Fraction of pairs i < j with ``s_i + eta <= s_j``."""
    M, upper = pair_violations(scores, eta)
    return float(np.mean(M[upper] <= 0.0))


def avg_pool(X):
    return PreimageDescriptor(as_frames(X).mean(axis=0), "avg")


def _checked(z, X):
    F = as_frames(X)
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (F.shape[1],):
        raise ShapeError(f"z has shape {z.shape}, frames have d={F.shape[1]}")
    return z, F


def rp_objective(z, X, p=RankParams()):
    z, F = _checked(z, X)
    return 0.5 * float(z @ z) + p.lam * hinge_sum(F @ z, p.eta)


def rp_grad(z, X, p=RankParams()):
    z, F = _checked(z, X)
    return z + p.lam * (F.T @ violation_counts(F @ z, p.eta))


def rp_fit(X, p=RankParams()):
    F = as_frames(X)
    res = armijo_descent(
        lambda z: rp_objective(z, F, p),
        lambda z: rp_grad(z, F, p),
        np.zeros(F.shape[1]),
        max_iters=p.max_iters,
        tol=p.tol,
        step=p.step,
    )
    return PreimageDescriptor(
        res.x, "rp", eta=p.eta, lam=p.lam, iterations=res.iterations, objective=res.value
    )
