"""Order-constrained kernel PCA pooling (kernel feature subspaces).

A sequence is summarized by ``n x p`` coefficients ``A`` spanning the subspace
``Phi(X) A`` of the RBF feature space. ``A`` minimizes the kernel-PCA
reconstruction error plus a hinge penalty asking the projection energy of
each frame, ``||Omega(Phi(x_i))||^2``, to grow with time. The constraint
``A^T K A = I`` makes the search space a generalized Grassmann manifold.

With ``k_i`` the i-th column of ``K``, ``B = K A`` and ``S = A^T K A``::

    energy_i = k_i^T A S A^T k_i = B_i S B_i^T
    F(A) = 1/2 sum_i (energy_i - 2 ||B_i||^2)
           + w sum_{i<j} max(0, energy_i + eta - energy_j)

The constant ``1/2 sum_i k(x_i, x_i)`` of the full reconstruction error is
dropped. Slacks are eliminated analytically, giving ``w = min(C, lambda)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .descriptors import SubspaceDescriptor
from .errors import NumericalError, ParamError, ShapeError
from .geometry import ManifoldPoint, RcgConfig, as_kernel, korthonormalize, rcg_minimize
from .kernel import DEFAULT_JITTER, bandwidth, cross_gram, gram
from .linrank import hinge_sum, order_satisfaction, violation_counts
from .seqdata import as_frames


@dataclass(frozen=True)
class KrpfsParams:
    p: int = 2
    eta: float = 0.01
    lam: float = 1.0
    slack_weight: float = 1.0
    jitter: float = DEFAULT_JITTER
    sigma: float | None = None
    use_slack: bool = True
    rcg: RcgConfig = field(default_factory=RcgConfig)

    def __post_init__(self):
        if self.p < 1:
            raise ParamError("subspace dimension p must be >= 1")
        if not self.eta > 0:
            raise ParamError("eta must be positive")
        if not (self.lam >= 0 and self.slack_weight > 0 and self.jitter >= 0):
            raise ParamError("lambda, C and jitter must be non-negative (C > 0)")
        if self.sigma is not None and not self.sigma > 0:
            raise ParamError("sigma must be positive")

    @property
    def hinge_weight(self):
        return min(self.slack_weight, self.lam) if self.use_slack else self.lam


class FlopCounter:
    """Accumulates floating-point operation counts of instrumented kernels."""

    def __init__(self):
        self.total = 0

    def add(self, n):
        self.total += int(n)


def _kmat(K):
    return as_kernel(K).values


def _check(A, Kv):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.shape[0] != Kv.shape[0]:
        raise ShapeError(f"A has {A.shape[0]} rows, K is {Kv.shape[0]} x {Kv.shape[1]}")
    return A


def energies(A, K):
    """Projection energy of every frame (valid off the manifold too)."""
    Kv = _kmat(K)
    A = _check(A, Kv)
    B = Kv @ A
    return np.einsum("ij,ij->i", B @ (A.T @ B), B)


def projection_energy(A, K, i):
    """Energy of frame ``i`` (0-based)."""
    e = energies(A, K)
    if not 0 <= i < e.shape[0]:
        raise IndexError(f"frame index {i} out of range for n={e.shape[0]}")
    return float(e[i])


def projection_coefficients(A, X, x, sigma):
    """``A^T k(X, x)``: coordinates of ``Phi(x)`` in the subspace basis."""
    return np.asarray(A).T @ cross_gram(X, np.atleast_2d(x), sigma)[:, 0]


def krpfs_objective(A, K, prm=KrpfsParams(), flops=None):
    Kv = _kmat(K)
    A = _check(A, Kv)
    n, p = A.shape
    B = Kv @ A
    S = A.T @ B
    e = np.einsum("ij,ij->i", B @ S, B)
    recon = 0.5 * float(np.sum(e) - 2.0 * np.einsum("ij,ij->", B, B))
    F = recon + prm.hinge_weight * hinge_sum(e, prm.eta)
    if flops is not None:
        flops.add(2 * n * n * p)  # K A
        flops.add(4 * n * p * p)  # A^T B and B S
        flops.add(4 * n * p + n)  # both row reductions
        flops.add(3 * n * (n - 1) // 2)  # pairwise hinge arguments, max, sum
    return F


def krpfs_eucgrad(A, K, prm=KrpfsParams()):
    """Euclidean gradient of :func:`krpfs_objective`.

    With ``S1 = K K A``, ``S2 = K A A^T``, ``S3 = A^T K A`` and
    ``K12 = sum_i c_i k_i k_i^T`` where ``c_i`` is the net count of violated
    pairs with ``i`` first minus those with ``i`` second::

        grad = S1 (S3 - 2I) + S2 S1 + 2 w (K12 A S3 + S2 K12 A)
    """
    Kv = _kmat(K)
    A = _check(A, Kv)
    p = A.shape[1]
    B = Kv @ A
    S3 = A.T @ B
    S1 = Kv @ B
    # S2 @ M == B @ (A.T @ M) without forming the n x n matrix S2
    grad = S1 @ (S3 - 2.0 * np.eye(p)) + B @ (A.T @ S1)
    w = prm.hinge_weight
    if w:
        e = np.einsum("ij,ij->i", B @ S3, B)
        c = violation_counts(e, prm.eta)
        if np.any(c):
            K12A = Kv @ (c[:, None] * B)
            grad = grad + 2.0 * w * (K12A @ S3 + B @ (A.T @ K12A))
    return grad


def kpca_oracle(K, p):
    """Closed-form minimizer for ``lambda = 0``.

    On ``A^T K A = I`` the objective is ``-1/2 tr(A^T K^2 A)``; its minimizers
    solve ``K^2 u = mu K u``, i.e. ``K u = mu u``. Taking the top ``p``
    eigenvectors scaled by ``1/sqrt(mu)`` gives ``F* = -1/2 sum mu``.
    """
    Kmat = as_kernel(K)
    Kv = Kmat.values
    n = Kv.shape[0]
    if not 1 <= p <= n:
        raise ParamError(f"p must be in [1, {n}], got {p}")
    try:
        mu, U = np.linalg.eigh(Kv)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition of K failed") from exc
    mu, U = mu[::-1][:p], U[:, ::-1][:, :p]
    if mu[-1] <= 0:
        raise NumericalError("K has non-positive eigenvalues among the top p")
    # sign convention: largest-magnitude entry of each column positive
    signs = np.sign(U[np.argmax(np.abs(U), axis=0), np.arange(p)])
    U = U * np.where(signs == 0, 1.0, signs)
    A = U / np.sqrt(mu)
    return ManifoldPoint(A, Kmat), -0.5 * float(np.sum(mu))


def fit_kernel_subspace(K, prm=KrpfsParams(), callback=None):
    """Run RCG on a given Gram matrix, starting from the kernel-PCA solution."""
    Kmat = as_kernel(K)
    if prm.p > Kmat.n:
        raise ParamError(f"p={prm.p} exceeds the number of frames n={Kmat.n}")
    start, _ = kpca_oracle(Kmat, prm.p)
    P0 = korthonormalize(start.A, Kmat)
    return rcg_minimize(
        lambda A: krpfs_objective(A, Kmat, prm),
        lambda A: krpfs_eucgrad(A, Kmat, prm),
        P0,
        prm.rcg,
        callback=callback,
    )


def krpfs_fit(X, prm=KrpfsParams()):
    F = as_frames(X)
    sigma = bandwidth(F) if prm.sigma is None else prm.sigma
    K = gram(F, sigma, prm.jitter)
    res = fit_kernel_subspace(K, prm)
    return SubspaceDescriptor(
        res.point.A,
        F,
        sigma,
        jitter=prm.jitter,
        objective=res.value,
        iterations=res.iterations,
        trace=tuple(res.trace),
    )


def descriptor_gram(desc):
    return gram(desc.frames, desc.sigma, desc.jitter)


def subspace_order_rate(desc, eta=0.01):
    """Fraction of pairs i < j with ``energy_i + eta <= energy_j``."""
    return order_satisfaction(energies(desc.A, descriptor_gram(desc)), eta)


def feasibility(desc):
    A = desc.A
    M = A.T @ descriptor_gram(desc).values @ A
    return float(np.linalg.norm(M - np.eye(A.shape[1])))
