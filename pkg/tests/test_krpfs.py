import numpy as np
import pytest
from conftest import brute_krpfs, central_fd, rel_err

from krpool.errors import ParamError, ShapeError
from krpool.geometry import RcgConfig, korthonormalize
from krpool.kernel import KernelMatrix, bandwidth, gram
from krpool.krpfs import (
    FlopCounter,
    KrpfsParams,
    energies,
    feasibility,
    fit_kernel_subspace,
    kpca_oracle,
    krpfs_eucgrad,
    krpfs_fit,
    krpfs_objective,
    projection_energy,
    subspace_order_rate,
)
from krpool.linrank import pair_violations
from krpool.seqdata import SynthSpec, synth_sequence


def _random_case(rng, n=6, p=2):
    X = rng.standard_normal((n, 2))
    K = gram(X, bandwidth(X), 1e-8)
    return K, korthonormalize(rng.standard_normal((n, p)), K).A


def _orthogonal(rng, p):
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    return Q


def test_energy_single_frame():
    assert projection_energy(np.array([[1.0]]), np.array([[1.0]]), 0) == 1.0
    assert projection_energy(np.zeros((3, 2)), np.eye(3), 2) == 0.0
    with pytest.raises(IndexError):
        projection_energy(np.ones((2, 1)), np.eye(2), 2)


def test_objective_single_frame():
    assert krpfs_objective(np.array([[1.0]]), np.array([[1.0]]), KrpfsParams(p=1)) == -0.5


def test_energy_and_objective_rotation_invariant(rng):
    K, A = _random_case(rng, 7, 3)
    R = _orthogonal(rng, 3)
    np.testing.assert_allclose(energies(A @ R, K), energies(A, K), atol=1e-12)
    prm = KrpfsParams(p=3)
    assert abs(krpfs_objective(A @ R, K, prm) - krpfs_objective(A, K, prm)) <= 1e-10


def test_objective_brute_force(rng):
    for _ in range(10):
        K, _ = _random_case(rng)
        A = rng.standard_normal((6, 2))  # off-manifold on purpose
        prm = KrpfsParams(eta=0.05, lam=float(rng.uniform(0, 2)), slack_weight=1.2)
        brute = brute_krpfs(A, K.values, prm.eta, prm.hinge_weight)
        assert abs(krpfs_objective(A, K, prm) - brute) <= 1e-12


def test_gradient_reconstruction_part(rng):
    K, A = _random_case(rng)
    prm = KrpfsParams(lam=0.0)
    fd = central_fd(lambda B: krpfs_objective(B, K, prm), A)
    assert rel_err(krpfs_eucgrad(A, K, prm), fd) <= 1e-6


def test_gradient_at_zero(rng):
    K, _ = _random_case(rng)
    np.testing.assert_array_equal(krpfs_eucgrad(np.zeros((6, 2)), K), 0.0)


def test_gradient_full_kink_free(rng):
    checked = 0
    while checked < 10:
        K, _ = _random_case(rng)
        A = rng.standard_normal((6, 2))
        prm = KrpfsParams(eta=0.01, lam=0.7)
        M, upper = pair_violations(energies(A, K), prm.eta)
        if np.min(np.abs(M[upper])) <= 1e-3:
            continue
        fd = central_fd(lambda B: krpfs_objective(B, K, prm), A)
        assert rel_err(krpfs_eucgrad(A, K, prm), fd) <= 1e-5
        checked += 1


def test_kpca_oracle_diagonal():
    P, f = kpca_oracle(np.diag([3.0, 2.0, 1.0]), 1)
    np.testing.assert_allclose(P.A[:, 0], [1 / np.sqrt(3), 0, 0], atol=1e-15)
    assert f == pytest.approx(-1.5, abs=1e-15)


def test_kpca_oracle_full_rank_and_substitution(rng):
    K, _ = _random_case(rng)
    _, f = kpca_oracle(K, 6)
    assert f == pytest.approx(-0.5 * np.trace(K.values), rel=1e-12)
    P, f2 = kpca_oracle(K, 2)
    assert abs(krpfs_objective(P.A, K, KrpfsParams(lam=0.0)) - f2) <= 1e-10
    with pytest.raises(ParamError):
        kpca_oracle(K, 7)


def test_fit_lambda_zero_stays_at_oracle(rng):
    X = rng.standard_normal((15, 3))
    prm = KrpfsParams(p=2, lam=0.0)
    d = krpfs_fit(X, prm)
    _, f = kpca_oracle(gram(X, bandwidth(X), prm.jitter), 2)
    assert abs(d.objective - f) <= 1e-4 * abs(f)
    assert feasibility(d) <= 1e-8


def test_fit_spiral_orders():
    spec = SynthSpec(3, 1, 20, 2, 0.0, "spiral")
    for c in range(3):
        d = krpfs_fit(synth_sequence(spec, 4, c, 0).frames, KrpfsParams(p=2))
        assert subspace_order_rate(d, 0.01) >= 0.95
        assert all(b <= a for a, b in zip(d.trace, d.trace[1:]))


def test_fit_deterministic(rng):
    X = rng.standard_normal((12, 2))
    a, b = krpfs_fit(X), krpfs_fit(X)
    assert abs(a.objective - b.objective) <= 1e-12


def test_linear_kernel_reduction(rng):
    # n <= d keeps the linear Gram nonsingular
    X = rng.standard_normal((6, 8))
    K = KernelMatrix(X @ X.T, float("nan"))
    res = fit_kernel_subspace(K, KrpfsParams(p=2, rcg=RcgConfig(max_iters=30)))
    U = X.T @ res.point.A
    np.testing.assert_allclose(U.T @ U, np.eye(2), atol=1e-8)


def test_flop_count_quadratic_in_n():
    def cost(n):
        fc = FlopCounter()
        krpfs_objective(np.ones((n, 2)), np.eye(n), KrpfsParams(p=2), flops=fc)
        return fc.total

    assert 3.5 <= cost(256) / cost(128) <= 4.5


def test_errors():
    with pytest.raises(ParamError):
        KrpfsParams(p=0)
    with pytest.raises(ShapeError):
        krpfs_objective(np.ones((3, 1)), np.eye(4))
    with pytest.raises(ParamError):
        fit_kernel_subspace(np.eye(2), KrpfsParams(p=3))
