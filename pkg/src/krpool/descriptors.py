"""Pooled sequence descriptors.

Two kinds exist: a single vector ``z`` in input space (average pooling, linear
rank pooling and the two pre-image poolers), and a kernel subspace given by a
coefficient matrix ``A`` over the frames of the pooled sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PREIMAGE_METHODS = ("avg", "rp", "bkrp", "ibkrp")


def _frozen(a, ndim):
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PreimageDescriptor:
    """Pooled vector plus the settings and diagnostics of the fit."""

    z: np.ndarray
    method: str
    eta: float = float("nan")
    lam: float = float("nan")
    slack_weight: float = float("nan")
    sigma: float = float("nan")
    iterations: int = 0
    objective: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "z", _frozen(self.z, 1))
        if self.method not in PREIMAGE_METHODS:
            raise ValueError(f"unknown pooling method {self.method!r}")
        if not np.all(np.isfinite(self.z)):
            raise ValueError("descriptor vector must be finite")

    @property
    def kind(self):
        return "preimage"

    @property
    def d(self):
        return self.z.shape[0]


@dataclass(frozen=True, eq=False)
class SubspaceDescriptor:
    """Kernel subspace ``Phi(frames) @ A`` with ``A.T @ K @ A = I``.

    ``K`` is ``gram(frames, sigma, jitter)``. The raw frames are kept because
    comparing two subspaces needs the cross-sequence kernel.
    """

    A: np.ndarray
    frames: np.ndarray
    sigma: float
    jitter: float = 0.0
    objective: float = 0.0
    iterations: int = 0
    trace: tuple = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen(self.A, 2))
        object.__setattr__(self, "frames", _frozen(self.frames, 2))
        if self.A.shape[0] != self.frames.shape[0]:
            raise ValueError("A rows must match the number of frames")

    @property
    def kind(self):
        return "subspace"

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.A.shape[1]

    @property
    def d(self):
        return self.frames.shape[1]
