"""Similarity kernels between pooled descriptors and classification Grams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import KindError, NumericalError, ParamError, ShapeError
from .kernel import bandwidth, cross_gram, gram, rbf


@dataclass(frozen=True, eq=False)
class ClassificationGram:
    values: np.ndarray
    hyper: float  # nu for subspaces, sigma_c for pre-images
    kind: str
    jitter: float = 0.0

    @property
    def m(self):
        return self.values.shape[0]

    def min_eig(self):
        return float(np.linalg.eigvalsh(self.values)[0])


def cross_sigma(D1, D2, sigma=None):
    """Cross-sequence bandwidth: geometric mean unless overridden."""
    if sigma is not None:
        return float(sigma)
    return float(np.sqrt(D1.sigma * D2.sigma))


def subspace_similarity(D1, D2, nu, sigma=None):
    """``exp(nu * ||A1^T K12 A2||_F^2)`` with ``K12`` the cross-sequence RBF Gram."""
    if not nu > 0:
        raise ParamError("nu must be positive")
    if D1.d != D2.d:
        raise ShapeError(f"feature dimension mismatch: {D1.d} vs {D2.d}")
    if D1 is D2 and sigma is None:
        # same basis: use the jittered Gram it was orthonormalized against
        K12 = gram(D1.frames, D1.sigma, D1.jitter).values
    else:
        K12 = cross_gram(D1.frames, D2.frames, cross_sigma(D1, D2, sigma))
    M = D1.A.T @ K12 @ D2.A
    return float(np.exp(nu * np.sum(M * M)))


def preimage_similarity(D1, D2, sigma_c):
    if D1.d != D2.d:
        raise ShapeError(f"feature dimension mismatch: {D1.d} vs {D2.d}")
    return rbf(D1.z, D2.z, sigma_c)


def descriptor_kind(descs):
    kinds = {d.kind for d in descs}
    if len(kinds) != 1:
        raise KindError(f"mixed descriptor kinds: {sorted(kinds)}")
    return kinds.pop()


def default_hyper(descs):
    """``1/p`` for subspaces; pooled-entry std of the stacked vectors otherwise."""
    kind = descriptor_kind(descs)
    if kind == "subspace":
        return 1.0 / max(d.p for d in descs)
    Z = np.stack([d.z for d in descs])
    if Z.shape[0] < 2 or np.all(Z == Z[0]):
        return 1.0
    return bandwidth(Z)


def _pairwise(rows, cols, kind, hyper, sigma):
    G = np.empty((len(rows), len(cols)))
    for r, a in enumerate(rows):
        for s, b in enumerate(cols):
            if kind == "subspace":
                G[r, s] = subspace_similarity(a, b, hyper, sigma)
            else:
                G[r, s] = preimage_similarity(a, b, hyper)
    return G


def gram_descriptors(descs, hyper=None, sigma=None):
    """Symmetric Gram over descriptors of a single kind.

    ``hyper`` is nu (subspace) or sigma_c (pre-image); ``sigma`` optionally
    replaces the geometric-mean cross bandwidth for subspaces. If the result
    cannot be Cholesky-factorized, 1e-8 is added to the diagonal.
    """
    descs = list(descs)
    kind = descriptor_kind(descs)
    if hyper is None:
        hyper = default_hyper(descs)
    m = len(descs)
    G = np.empty((m, m))
    for r in range(m):
        for s in range(r, m):
            a, b = descs[r], descs[s]
            if kind == "subspace":
                v = subspace_similarity(a, a if r == s else b, hyper, sigma)
            else:
                v = preimage_similarity(a, b, hyper)
            G[r, s] = G[s, r] = v
    jitter = 0.0
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        jitter = 1e-8
        G[np.diag_indices(m)] += jitter
    return ClassificationGram(G, float(hyper), kind, jitter)


def cross_gram_descriptors(test, train, hyper, sigma=None):
    """Rows: test descriptors, columns: training descriptors."""
    test, train = list(test), list(train)
    kind = descriptor_kind(test + train)
    return _pairwise(test, train, kind, hyper, sigma)


def fuse(grams):
    """Average several Grams over the same descriptors (multi-stream fusion)."""
    grams = [np.asarray(getattr(g, "values", g), dtype=np.float64) for g in grams]
    shapes = {g.shape for g in grams}
    if len(shapes) != 1:
        raise ShapeError(f"cannot fuse Grams of shapes {sorted(shapes)}")
    return np.mean(grams, axis=0)


def check_psd(G, tol=1e-8):
    lo = float(np.linalg.eigvalsh(np.asarray(getattr(G, "values", G)))[0])
    if lo < -tol:
        raise NumericalError(f"Gram has eigenvalue {lo:.3g} < -{tol:g}")
    return lo

