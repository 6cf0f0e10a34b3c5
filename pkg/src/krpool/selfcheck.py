"""Numerical self-tests: gradients against finite differences, manifold
invariants and the closed-form kernel-PCA optimum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry, krpfs, preimage
from .geometry import RcgConfig
from .kernel import KernelMatrix, bandwidth, gram
from .linrank import pair_violations

FD_STEP = 1e-6
FD_TOL = 1e-5


@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool

    def line(self):
        status = "pass" if self.passed else "FAIL"
        return f"{self.name},{status},{self.value:.2g},{self.limit:.2g}"


def central_difference(f, x, h=FD_STEP):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def _preimage_case(rng, max_tries=200):
    for _ in range(max_tries):
        n, d = int(rng.integers(3, 9)), int(rng.integers(1, 5))
        X = rng.standard_normal((n, d))
        z = X.mean(0) + 0.5 * rng.standard_normal(d)
        prm = preimage.PreimageParams(lam=float(rng.uniform(0.5, 2)), sigma=bandwidth(X))
        k = preimage.kernel_scores(z, X, prm.sigma)
        if _kink_free_eta(k, prm.eta):
            return z, X, prm
    raise RuntimeError("could not sample a kink-free point")


def _kink_free_eta(scores, eta, gap=1e-3):
    M, upper = pair_violations(scores, eta)
    return np.min(np.abs(M[upper])) > gap


def check_preimage_grad(rng, trials=20, fault=None):
    worst = 0.0
    for t in range(trials):
        variant = ("bkrp", "ibkrp")[t % 2]
        z, X, prm = _preimage_case(rng)
        g = preimage.preimage_grad(z, X, prm, variant)
        if fault == "grad-sign":
            g = -g
        fd = central_difference(lambda v: preimage.preimage_objective(v, X, prm, variant), z)
        worst = max(worst, rel_err(g, fd))
    return Check("preimage_grad_fd_rel_err", worst, FD_TOL, worst <= FD_TOL)


def _krpfs_case(rng, max_tries=200):
    for _ in range(max_tries):
        n, p = int(rng.integers(4, 9)), int(rng.integers(1, 4))
        X = rng.standard_normal((n, 2))
        K = gram(X, bandwidth(X), 1e-8)
        A = rng.standard_normal((n, p))
        prm = krpfs.KrpfsParams(p=p, eta=0.01)
        if _kink_free_eta(krpfs.energies(A, K), prm.eta):
            return A, K, prm
    raise RuntimeError("could not sample a kink-free point")


def check_krpfs_grad(rng, trials=20, fault=None):
    worst = 0.0
    for _ in range(trials):
        A, K, prm = _krpfs_case(rng)
        g = krpfs.krpfs_eucgrad(A, K, prm)
        if fault == "grad-sign":
            g = -g
        fd = central_difference(lambda B: krpfs.krpfs_objective(B, K, prm), A)
        worst = max(worst, rel_err(g, fd))
    return Check("krpfs_eucgrad_fd_rel_err", worst, FD_TOL, worst <= FD_TOL)


def _random_spd(rng, n):
    M = rng.standard_normal((n, n))
    return KernelMatrix(M @ M.T / n + 0.1 * np.eye(n), 1.0)


def check_manifold(rng, trials=10):
    worst_skew = worst_feas = 0.0
    for _ in range(trials):
        n, p = int(rng.integers(4, 10)), int(rng.integers(1, 4))
        K = _random_spd(rng, n)
        P = geometry.korthonormalize(rng.standard_normal((n, p)), K)
        rg = geometry.riemannian_grad(P, rng.standard_normal((n, p)))
        worst_skew = max(worst_skew, geometry.skewness(P, rg))
        Q = geometry.retract(P, rg, 0.3)
        worst_feas = max(worst_feas, Q.feasibility())
    return [
        Check("riemannian_grad_skew", worst_skew, 1e-8, worst_skew <= 1e-8),
        Check("retraction_feasibility", worst_feas, 1e-8, worst_feas <= 1e-8),
    ]


def check_kpca(rng, trials=3):
    worst = 0.0
    for _ in range(trials):
        X = rng.standard_normal((12, 2))
        p = int(rng.integers(1, 4))
        prm = krpfs.KrpfsParams(p=p, lam=0.0)
        K = gram(X, bandwidth(X), prm.jitter)
        _, fstar = krpfs.kpca_oracle(K, p)
        res = krpfs.fit_kernel_subspace(K, prm)
        worst = max(worst, abs(res.value - fstar) / abs(fstar))
    return Check("kpca_reduction_rel_err", worst, 1e-4, worst <= 1e-4)


def check_rayleigh(rng, trials=3, fault=None):
    worst = 0.0
    for _ in range(trials):
        n, p = int(rng.integers(4, 10)), int(rng.integers(1, 4))
        K = _random_spd(rng, n)
        K2 = K.values @ K.values
        sign = -1.0 if fault == "grad-sign" else 1.0
        res = geometry.rcg_minimize(
            lambda A: -0.5 * np.trace(A.T @ K2 @ A),
            lambda A: -sign * K2 @ A,
            geometry.korthonormalize(rng.standard_normal((n, p)), K),
            RcgConfig(max_iters=500, grad_tol=1e-10),
        )
        target = -0.5 * np.sum(np.linalg.eigvalsh(K.values)[::-1][:p])
        worst = max(worst, abs(res.value - target) / abs(target))
    return Check("rayleigh_rel_err", worst, 1e-6, worst <= 1e-6)


def run_checks(seed=0, fault=None):
    rng = np.random.default_rng(seed)
    checks = [check_preimage_grad(rng, fault=fault), check_krpfs_grad(rng, fault=fault)]
    checks += check_manifold(rng)
    checks.append(check_kpca(rng))
    checks.append(check_rayleigh(rng, fault=fault))
    return checks
