"""Dense Lyapunov and Riccati solvers and LDL^T right-hand-side factors.

Sign conventions
----------------
``solve_lyapunov(F, Q)`` solves ``F^T P + P F = -Q``.  The factorizations
``build_ldl_rhs_order1/2`` return ``L D L^T`` equal to the right-hand side
``R`` of ``F^T P + P F = R``, so callers pass ``Q = -L D L^T``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla


class SingularEquationError(np.linalg.LinAlgError):
    """The Lyapunov operator is singular (F and -F share an eigenvalue)."""


class RiccatiError(np.linalg.LinAlgError):
    """No stabilizing solution of the Riccati equation was found."""


@dataclass
class LdlFactorization:
    L: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        if self.D.shape != (self.L.shape[1], self.L.shape[1]):
            raise ValueError(f"core shape {self.D.shape} does not match L with {self.L.shape[1]} columns")
        if not np.array_equal(self.D, self.D.T):
            raise ValueError("core D must be symmetric")

    def product(self):
        P = self.L @ self.D @ self.L.T
        return 0.5 * (P + P.T)


def _sym(P):
    return 0.5 * (P + P.T)


def solve_lyapunov(F, Q, *, sep_tol=1e-12):
    """Solve ``F^T P + P F = -Q`` by the Bartels-Stewart scheme."""
    F = np.asarray(F, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = F.shape[0]
    if F.shape != (n, n) or Q.shape != (n, n):
        raise ValueError("F and Q must be square of equal size")
    lam = np.linalg.eigvals(F)
    sep = np.abs(lam[:, None] + lam[None, :]).min()
    if sep <= sep_tol * max(np.linalg.norm(F, 2), 1.0):
        raise SingularEquationError(f"F and -F share an eigenvalue (separation {sep:.3e})")
    # scipy solves A X + X A^H = Q
    P = _sym(spla.solve_continuous_lyapunov(F.T, -Q))
    return P


def lyapunov_residual(F, P, Q):
    return float(np.linalg.norm(F.T @ P + P @ F + Q))


def riccati_residual(P, A, B, C):
    """Frobenius norm of ``A^T P + P A - P B B^T P + C^T C``."""
    BtP = B.T @ P
    R = A.T @ P + P @ A - BtP.T @ BtP + C.T @ C
    return float(np.linalg.norm(R))


def _hamiltonian_care(A, G, Q):
    n = A.shape[0]
    Ham = np.block([[A, -G], [-Q, -A.T]])
    T, U, sdim = spla.schur(Ham, output="real", sort="lhp")
    if sdim != n:
        raise RiccatiError(f"Hamiltonian has {sdim} stable eigenvalues, expected {n}")
    U11, U21 = U[:n, :n], U[n:, :n]
    if np.linalg.cond(U11) > 1e14:
        raise RiccatiError("stable invariant subspace is not a graph (no stabilizing solution)")
    return _sym(np.linalg.solve(U11.T, U21.T).T)


def solve_care(A, B, C, *, refine_steps=8):
    """Stabilizing solution of ``A^T P + P A - P B B^T P = -C^T C``.

    Uses the stable invariant subspace of the Hamiltonian matrix followed
    by a few Newton-Kleinman steps as refinement.
    """
    A = np.asarray(A, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    G = B @ B.T
    Q = C.T @ C
    P = _hamiltonian_care(A, G, Q)
    res = riccati_residual(P, A, B, C)
    for _ in range(refine_steps):
        F = A - G @ P
        if np.linalg.eigvals(F).real.max() >= 0:
            break
        Pn = solve_lyapunov(F, Q + P @ G @ P)
        rn = riccati_residual(Pn, A, B, C)
        if not rn < res:
            break
        P, res = Pn, rn
    abscissa = np.linalg.eigvals(A - G @ P).real.max()
    if not abscissa < 0:
        raise RiccatiError(f"closed loop not Hurwitz (spectral abscissa {abscissa:.3e})")
    return P


def build_ldl_rhs_order1(Z0, A_alpha):
    """Factor ``-A^T P0 - P0 A`` with ``P0 = Z0 Z0^T``.

    ``L = [A^T Z0, Z0]`` and ``D = -[[0, I], [I, 0]]``.
    """
    Z0 = np.asarray(Z0, dtype=float)
    k = Z0.shape[1]
    L = np.hstack([A_alpha.T @ Z0, Z0])
    J = np.block([[np.zeros((k, k)), np.eye(k)], [np.eye(k), np.zeros((k, k))]])
    return LdlFactorization(L, -J)


def build_ldl_rhs_order2(Z0, A_astar, L_beta, D_beta, L_delta, D_delta,
                         K_beta, K_delta, A_beta, A_delta, B, *, repeated=False):
    """Factor the right-hand side of the second-order Lyapunov equation.

    Returns ``L D L^T`` equal to::

        -P0 A* - A*^T P0 - sum over ordered pairs (b, d) in {(beta, delta), (delta, beta)}
            of (P_b A_d + A_d^T P_b - P_b B B^T P_d)

    for ``P0 = Z0 Z0^T``, ``P_beta = L_beta D_beta L_beta^T`` and likewise for
    delta, with ``K = B^T P``.  Since ``K`` carries the full ``B^T P``, the
    closed-loop-like blocks use ``A - B K / 2``.  With ``repeated=True``
    (beta == delta) the single ordered pair is counted once.
    """
    Z0 = np.asarray(Z0, dtype=float)
    n, k = Z0.shape
    for name, Lf, Df, Kf in (("beta", L_beta, D_beta, K_beta), ("delta", L_delta, D_delta, K_delta)):
        if Lf.shape[0] != n or Df.shape != (Lf.shape[1], Lf.shape[1]) or Kf.shape != (B.shape[1], n):
            raise ValueError(f"inconsistent {name} factors")
    J = np.block([[np.zeros((k, k)), np.eye(k)], [np.eye(k), np.zeros((k, k))]])
    Fb = A_beta - 0.5 * B @ K_beta
    Fd = A_delta - 0.5 * B @ K_delta
    if repeated:
        X = Fb.T @ L_beta
        Y = L_beta
        Dc = D_beta
    else:
        X = np.hstack([Fd.T @ L_beta, Fb.T @ L_delta])
        Y = np.hstack([L_beta, L_delta])
        Dc = spla.block_diag(D_beta, D_delta)
    kc = Dc.shape[0]
    L = np.hstack([A_astar.T @ Z0, Z0, X, Y])
    Zc = np.zeros((kc, kc))
    D = -spla.block_diag(J, np.block([[Zc, Dc], [Dc, Zc]]))
    return LdlFactorization(L, D)


def ldl_from_symmetric(P, rtol=1e-13):
    """Truncated eigen-factorization ``P ~ L D L^T`` with diagonal D."""
    lam, V = np.linalg.eigh(_sym(P))
    keep = np.abs(lam) > rtol * max(np.abs(lam).max(initial=0.0), np.finfo(float).tiny)
    return LdlFactorization(V[:, keep], np.diag(lam[keep]))


def psd_factor(P, rtol=1e-13):
    """Low-rank ``Z`` with ``Z Z^T ~ P`` for positive semidefinite P."""
    lam, V = np.linalg.eigh(_sym(P))
    keep = lam > rtol * max(lam.max(initial=0.0), np.finfo(float).tiny)
    return V[:, keep] * np.sqrt(lam[keep])


def dump_csv(path, X):
    """Debug dump of a matrix."""
    np.savetxt(path, np.atleast_2d(X), delimiter=",", fmt="%.17g")
