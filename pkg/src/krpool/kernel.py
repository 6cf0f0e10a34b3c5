"""RBF kernel, Gram matrices and the per-sequence bandwidth rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DegenerateSequence, NumericalError, ParamError, ShapeError
from .seqdata import as_frames

DEFAULT_JITTER = 1e-8


def _check_sigma(sigma):
    if not (np.isfinite(sigma) and sigma > 0):
        raise ParamError(f"bandwidth must be positive, got {sigma}")


def rbf(x, z, sigma):
    _check_sigma(sigma)
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise ShapeError(f"dimension mismatch: {x.shape} vs {z.shape}")
    diff = x - z
    return float(np.exp(-np.dot(diff, diff) / (2.0 * sigma * sigma)))


def bandwidth(X):
    """Sample std (ddof=1) of all n*d entries pooled together."""
    F = as_frames(X)
    entries = F.ravel()
    if entries.size < 2:
        raise DegenerateSequence("bandwidth needs at least two entries")
    if F.shape[0] > 1 and np.all(F == F[0]):
        raise DegenerateSequence("all frames are identical")
    sigma = float(np.std(entries, ddof=1))
    if sigma < 1e-8:
        raise DegenerateSequence(f"sequence is (nearly) constant: std={sigma:.3g}")
    return sigma


def cross_gram(X1, X2, sigma):
    _check_sigma(sigma)
    A = as_frames(X1)
    B = as_frames(X2)
    if A.shape[1] != B.shape[1]:
        raise ShapeError(f"feature dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    # explicit differences (not the expanded-norm trick) keep k(x, x) exactly 1
    D = np.empty((A.shape[0], B.shape[0]))
    for r, a in enumerate(A):
        diff = B - a
        D[r] = np.einsum("sk,sk->s", diff, diff)
    return np.exp(-D / (2.0 * sigma * sigma))


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Symmetric Gram matrix with ``jitter`` already added to the diagonal."""

    values: np.ndarray
    sigma: float
    jitter: float = 0.0

    @property
    def n(self):
        return self.values.shape[0]

    def cholesky(self):
        """Cached Cholesky factor for K^-1 applications."""
        cf = self.__dict__.get("_cho")
        if cf is None:
            try:
                cf = cho_factor(self.values, lower=True, check_finite=False)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(
                    f"Gram matrix is not positive definite with jitter={self.jitter:g}; "
                    "increase the jitter"
                ) from exc
            object.__setattr__(self, "_cho", cf)
        return cf

    def solve(self, B):
        return cho_solve(self.cholesky(), B, check_finite=False)


def gram(X, sigma, jitter=0.0):
    if jitter < 0:
        raise ParamError("jitter must be non-negative")
    F = as_frames(X)
    values = cross_gram(F, F, sigma)
    values = 0.5 * (values + values.T)
    if jitter:
        values[np.diag_indices_from(values)] += jitter
    values.setflags(write=False)
    K = KernelMatrix(values, float(sigma), float(jitter))
    if jitter > 0:
        # a jittered Gram is meant to be factorized; fail early if it cannot be
        K.cholesky()
    return K
