import numpy as np
import pytest
import scipy.linalg as spla
from conftest import kleinman_kron_care, kron_lyapunov

from paesdre.matrix_equations import (
    LdlFactorization,
    RiccatiError,
    SingularEquationError,
    build_ldl_rhs_order1,
    build_ldl_rhs_order2,
    ldl_from_symmetric,
    lyapunov_residual,
    psd_factor,
    riccati_residual,
    solve_care,
    solve_lyapunov,
)


def random_hurwitz(rng, n):
    A = rng.standard_normal((n, n))
    return A - (np.linalg.eigvals(A).real.max() + 0.5) * np.eye(n)


def test_lyapunov_scalar_and_identity():
    np.testing.assert_allclose(solve_lyapunov(np.array([[-1.0]]), np.array([[2.0]])), [[1.0]])
    np.testing.assert_allclose(solve_lyapunov(-np.eye(2), 2 * np.eye(2)), np.eye(2), atol=1e-15)


def test_lyapunov_triangular_against_kronecker():
    F = np.array([[-1.0, 0.0], [1.0, -2.0]])
    P = solve_lyapunov(F, np.eye(2))
    np.testing.assert_allclose(P, kron_lyapunov(F, np.eye(2)), rtol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_lyapunov_matches_kronecker(rng, n):
    for _ in range(5):
        F = random_hurwitz(rng, n)
        Q = rng.standard_normal((n, n))
        Q = Q + Q.T
        P = solve_lyapunov(F, Q)
        ref = kron_lyapunov(F, Q)
        assert np.linalg.norm(P - ref) <= 1e-10 * np.linalg.norm(ref)
        assert np.linalg.norm(P - P.T) <= 1e-13 * np.linalg.norm(P)
        tol = 1e-10 * (np.linalg.norm(F) * np.linalg.norm(P) + np.linalg.norm(Q))
        assert lyapunov_residual(F, P, Q) <= tol


def test_lyapunov_singular_operator():
    F = np.diag([1.0, -1.0])  # lambda_1 + lambda_2 = 0
    with pytest.raises(SingularEquationError):
        solve_lyapunov(F, np.eye(2))


@pytest.mark.parametrize("a,b,c,p", [(0.0, 1.0, 1.0, 1.0), (1.0, 1.0, 0.0, 2.0), (-1.0, 1.0, 0.0, 0.0)])
def test_care_scalar_closed_form(a, b, c, p):
    P = solve_care([[a]], [[b]], [[c]])
    assert P[0, 0] == pytest.approx(p, abs=1e-12)
    assert a - b * b * P[0, 0] < 0


def test_care_scalar_residual_and_perturbation():
    A, B, C = np.zeros((1, 1)), np.ones((1, 1)), np.ones((1, 1))
    assert riccati_residual(np.ones((1, 1)), A, B, C) <= 1e-14
    assert riccati_residual(np.zeros((2, 2)), np.eye(2), np.ones((2, 1)), np.zeros((1, 2))) == 0.0
    # first-order growth: d/dP of -P^2 at P = 1 is -2
    for eps in (1e-3, 1e-5):
        res = riccati_residual(np.ones((1, 1)) + eps, A, B, C)
        assert res == pytest.approx(2 * eps, rel=1e-2)


@pytest.mark.parametrize("n,m,l", [(2, 1, 1), (4, 2, 1), (6, 1, 2), (8, 2, 3)])
def test_care_matches_kleinman_kronecker(rng, n, m, l):
    for _ in range(4):
        A = rng.standard_normal((n, n)) / np.sqrt(n)
        A -= (np.linalg.eigvals(A).real.max() - 0.3) * np.eye(n)  # mildly unstable
        B = rng.standard_normal((n, m))
        C = rng.standard_normal((l, n))
        P = solve_care(A, B, C)
        ref = kleinman_kron_care(A, B, C)
        assert np.linalg.norm(P - ref) <= 1e-10 * np.linalg.norm(ref)
        assert riccati_residual(P, A, B, C) <= 1e-9 * max(np.linalg.norm(C.T @ C), 1.0)
        assert np.linalg.eigvals(A - B @ B.T @ P).real.max() < 0
        assert np.linalg.eigvalsh(P).min() >= -1e-10 * np.linalg.norm(P)


def test_care_agrees_with_scipy(rng):
    A = rng.standard_normal((7, 7))
    B = rng.standard_normal((7, 2))
    C = rng.standard_normal((2, 7))
    ref = spla.solve_continuous_are(A, B, C.T @ C, np.eye(2))
    np.testing.assert_allclose(solve_care(A, B, C), ref, rtol=1e-9, atol=1e-9)


def test_care_rejects_unstabilizable():
    A = np.diag([1.0, -1.0])
    B = np.array([[0.0], [1.0]])  # unstable mode not actuated
    C = np.eye(2)
    with pytest.raises(RiccatiError):
        solve_care(A, B, C)


def test_ldl_order1_trivial_cases(rng):
    Z0 = rng.standard_normal((5, 2))
    assert np.abs(build_ldl_rhs_order1(Z0, np.zeros((5, 5))).product()).max() == 0.0
    f = build_ldl_rhs_order1(np.zeros((5, 2)), rng.standard_normal((5, 5)))
    assert np.abs(f.product()).max() == 0.0


def test_ldl_order1_dense_identity(rng):
    for _ in range(50):
        n, k = 5, 2
        Z0 = rng.standard_normal((n, k))
        A = rng.standard_normal((n, n))
        f = build_ldl_rhs_order1(Z0, A)
        P0 = Z0 @ Z0.T
        dense = -A.T @ P0 - P0 @ A
        assert f.L.shape == (n, 2 * k)
        assert np.linalg.norm(f.product() - dense) <= 1e-13 * np.linalg.norm(dense)


def _dense_rhs2(P0, Ast, Pb, Pd, Ab, Ad, B, repeated):
    G = B @ B.T
    R = -P0 @ Ast - Ast.T @ P0
    pairs = [(Pb, Ad, Pd)] if repeated else [(Pb, Ad, Pd), (Pd, Ab, Pb)]
    for Px, Ay, Py in pairs:
        R -= Px @ Ay + Ay.T @ Px - Px @ G @ Py
    return R


def _random_ldl(rng, n, k):
    L = rng.standard_normal((n, k))
    D = np.diag(rng.standard_normal(k))
    return L, D


def test_ldl_order2_dense_identity(rng):
    n, m = 6, 2
    for trial in range(50):
        Z0 = rng.standard_normal((n, 3))
        Ast = rng.standard_normal((n, n)) if trial % 2 else np.zeros((n, n))
        Lb, Db = _random_ldl(rng, n, 3)
        Ld, Dd = _random_ldl(rng, n, 2)
        Ab, Ad = rng.standard_normal((2, n, n))
        B = rng.standard_normal((n, m))
        Pb, Pd = Lb @ Db @ Lb.T, Ld @ Dd @ Ld.T
        f = build_ldl_rhs_order2(Z0, Ast, Lb, Db, Ld, Dd, B.T @ Pb, B.T @ Pd, Ab, Ad, B)
        dense = _dense_rhs2(Z0 @ Z0.T, Ast, Pb, Pd, Ab, Ad, B, False)
        assert np.linalg.norm(f.product() - dense) <= 1e-12 * np.linalg.norm(dense)


def test_ldl_order2_repeated_index(rng):
    n = 6
    for _ in range(50):
        Z0 = rng.standard_normal((n, 2))
        Lb, Db = _random_ldl(rng, n, 3)
        Ab = rng.standard_normal((n, n))
        B = rng.standard_normal((n, 1))
        Pb = Lb @ Db @ Lb.T
        f = build_ldl_rhs_order2(Z0, np.zeros((n, n)), Lb, Db, Lb, Db, B.T @ Pb, B.T @ Pb,
                                 Ab, Ab, B, repeated=True)
        dense = _dense_rhs2(Z0 @ Z0.T, np.zeros((n, n)), Pb, Pb, Ab, Ab, B, True)
        prod = f.L @ f.D @ f.L.T
        assert np.linalg.norm(prod - prod.T) <= 1e-13 * np.linalg.norm(prod)
        assert np.linalg.norm(f.product() - dense) <= 1e-12 * np.linalg.norm(dense)


def test_ldl_order2_all_zero():
    n = 4
    Z = np.zeros((n, 1))
    zero = np.zeros((n, n))
    L = np.ones((n, 1))
    D = np.eye(1)
    K = np.zeros((1, n))
    f = build_ldl_rhs_order2(Z, zero, L, D, L, D, K, K, zero, zero, np.zeros((n, 1)))
    assert np.abs(f.product()).max() == 0.0


def test_ldl_order2_dimension_check(rng):
    n = 4
    with pytest.raises(ValueError):
        build_ldl_rhs_order2(np.ones((n, 1)), np.zeros((n, n)), np.ones((n, 2)), np.eye(3),
                             np.ones((n, 1)), np.eye(1), np.zeros((1, n)), np.zeros((1, n)),
                             np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, 1)))


def test_ldl_container_checks():
    with pytest.raises(ValueError):
        LdlFactorization(np.ones((3, 2)), np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        LdlFactorization(np.ones((3, 2)), np.eye(3))


def test_symmetric_factors(rng):
    X = rng.standard_normal((6, 3))
    P = X @ np.diag([2.0, -1.0, 0.5]) @ X.T
    f = ldl_from_symmetric(P)
    assert f.L.shape[1] == 3
    np.testing.assert_allclose(f.product(), P, atol=1e-12)
    Z = psd_factor(X @ X.T)
    np.testing.assert_allclose(Z @ Z.T, X @ X.T, atol=1e-12)
