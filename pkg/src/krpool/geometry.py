"""Generalized Stiefel/Grassmann geometry for ``{A : A^T K A = I}``.

The metric is ``<U, V>_K = tr(U^T K V)``. Tangent vectors at ``A`` satisfy
``A^T K xi`` skew-symmetric. The objectives optimized here depend on ``A``
only through ``A A^T`` so the Grassmann quotient is handled implicitly by
optimizing on the total space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NumericalError, ParamError, ShapeError
from .kernel import KernelMatrix


def sym(L):
    return 0.5 * (L + L.T)


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    A: np.ndarray
    K: KernelMatrix

    @property
    def KA(self):
        cached = self.__dict__.get("_KA")
        if cached is None:
            cached = self.K.values @ self.A
            object.__setattr__(self, "_KA", cached)
        return cached

    def feasibility(self):
        """Frobenius distance of ``A^T K A`` from the identity."""
        M = self.A.T @ self.KA
        return float(np.linalg.norm(M - np.eye(M.shape[0])))


def as_kernel(K):
    if isinstance(K, KernelMatrix):
        return K
    vals = np.array(K, dtype=np.float64)
    vals.setflags(write=False)
    return KernelMatrix(vals, float("nan"), 0.0)


def korthonormalize(A0, K):
    """``A0 R^-1`` with ``R^T R = A0^T K A0`` (Cholesky)."""
    K = as_kernel(K)
    A0 = np.asarray(A0, dtype=np.float64)
    if A0.ndim != 2 or A0.shape[0] != K.n:
        raise ShapeError(f"A has shape {A0.shape}, K is {K.n} x {K.n}")
    M = sym(A0.T @ K.values @ A0)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("A is rank deficient with respect to K") from exc
    d = np.diag(L)
    if np.min(d) <= 1e-12 * max(np.max(d), 1.0):
        raise NumericalError("A is numerically rank deficient with respect to K")
    # A0 R^-1 = (R^-T A0^T)^T, R^T = L
    A = solve_triangular(L, A0.T, lower=True, check_finite=False).T
    return ManifoldPoint(A, K)


def inner(P, U, V):
    return float(np.sum(U * (P.K.values @ V)))


def norm(P, U):
    return float(np.sqrt(max(inner(P, U, U), 0.0)))


def _check_shape(P, G):
    G = np.asarray(G, dtype=np.float64)
    if G.shape != P.A.shape:
        raise ShapeError(f"expected shape {P.A.shape}, got {G.shape}")
    return G


def tangent_project(P, G):
    G = _check_shape(P, G)
    return G - P.A @ sym(P.KA.T @ G)


def riemannian_grad(P, egrad):
    egrad = _check_shape(P, egrad)
    try:
        KinvG = P.K.solve(egrad)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("K factorization failed") from exc
    return KinvG - P.A @ sym(P.A.T @ egrad)


def retract(P, xi, t=1.0):
    if t == 0:
        return P
    xi = _check_shape(P, xi)
    return korthonormalize(P.A + t * xi, P.K)


def transport(Pold, Pnew, xi):
    xi = _check_shape(Pold, xi)
    if Pnew is Pold:
        return xi
    return tangent_project(Pnew, xi)


def skewness(P, xi):
    """Frobenius norm of the symmetric part of ``A^T K xi``."""
    return float(np.linalg.norm(sym(P.KA.T @ xi)))


@dataclass(frozen=True)
class RcgConfig:
    max_iters: int = 100
    grad_tol: float = 1e-6
    c1: float = 1e-4
    restart_every: int = 20
    min_step: float = 1e-16

    def __post_init__(self):
        if self.max_iters < 1 or self.restart_every < 1:
            raise ParamError("max_iters and restart_every must be positive")
        if not (self.grad_tol > 0 and 0 < self.c1 < 1):
            raise ParamError("grad_tol must be positive and c1 in (0, 1)")


@dataclass
class RcgResult:
    point: ManifoldPoint
    trace: list
    iterations: int
    grad_norm: float
    stalled: bool = False
    converged: bool = False
    feasibility: list = field(default_factory=list)

    @property
    def value(self):
        return self.trace[-1]


def rcg_minimize(objective, eucgrad, P0, cfg=RcgConfig(), callback=None):
    """Riemannian conjugate gradient (Polak-Ribiere+, Armijo backtracking).

    ``objective`` and ``eucgrad`` take the coefficient matrix ``A``. The trace
    holds the objective at the start point and after every accepted step, so
    it is non-increasing. ``callback(point, rgrad)`` sees every iterate.
    """
    P = P0
    f = float(objective(P.A))
    trace = [f]
    feas = [P.feasibility()]
    g = riemannian_grad(P, eucgrad(P.A))
    gg = inner(P, g, g)
    direction = -g
    step = None
    stalled = converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        if callback is not None:
            callback(P, g)
        gnorm = np.sqrt(max(gg, 0.0))
        if gnorm <= cfg.grad_tol:
            converged = True
            break
        slope = inner(P, g, direction)
        if slope >= 0:
            direction, slope = -g, -gg
        dnorm = norm(P, direction)
        # initial trial: twice the previous step length, measured in the metric
        t = (1.0 if step is None else 2.0 * step) / dnorm
        while True:
            try:
                Q = retract(P, direction, t)
                fq = float(objective(Q.A))
            except NumericalError:
                fq = np.inf
            if fq <= f + cfg.c1 * t * slope:
                break
            t *= 0.5
            if t * dnorm < cfg.min_step:
                stalled = True
                break
        if stalled:
            break
        step = t * dnorm
        g_new = riemannian_grad(Q, eucgrad(Q.A))
        gg_new = inner(Q, g_new, g_new)
        if it % cfg.restart_every == 0:
            beta = 0.0
        else:
            g_old = transport(P, Q, g)
            beta = max(0.0, inner(Q, g_new, g_new - g_old) / gg)
        direction = -g_new + beta * transport(P, Q, direction)
        P, f, g, gg = Q, fq, g_new, gg_new
        trace.append(f)
        feas.append(P.feasibility())
    return RcgResult(
        P, trace, it, float(np.sqrt(max(gg, 0.0))), stalled, converged, feas
    )
