"""Series expansion of the state-dependent Riccati feedback.

With ``A(rho) ~ A0 + sum_j rho_j A_j`` and ``P(rho) ~ sum_alpha rho^alpha P_alpha``
the coefficients follow from matching powers of rho in

    A^T P + P A - (1/gamma) P B B^T P = -C^T C.

The input penalty gamma is realized by substituting ``B -> B / sqrt(gamma)``
everywhere, so the feedback reads ``u = -(1/gamma) B^T P(rho) v``.  Systems in
mass form are reduced to state-space form (``M^{-1} A``, ``M^{-1} B``) first.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import autoencoder as ae
from .lpv_expansion import LpvCoefficients, evaluate_lpv_matrix
from .matrix_equations import (
    RiccatiError,
    build_ldl_rhs_order1,
    build_ldl_rhs_order2,
    ldl_from_symmetric,
    psd_factor,
    riccati_residual,
    solve_care,
    solve_lyapunov,
)
from .multiindex import enumerate_multiindices, exponent_table
from .sdc_model import evaluate_coefficient

log = logging.getLogger(__name__)


class ExpansionError(np.linalg.LinAlgError):
    def __init__(self, alpha, cause):
        super().__init__(f"matrix equation for multiindex {alpha} failed: {cause}")
        self.alpha = alpha


class SdreFailure(np.linalg.LinAlgError):
    def __init__(self, v, cause):
        super().__init__(f"SDRE solve failed at state with norm {np.linalg.norm(v):.3e}: {cause}")
        self.state = np.array(v, copy=True)


@dataclass
class FeedbackExpansion:
    """Coefficients ``P_alpha`` and gains ``K_alpha = B^T P_alpha`` for ``|alpha| <= p``.

    ``B`` here is the state-space input matrix (``M^{-1} B`` for mass-form
    systems), unscaled by gamma.
    """

    p: int
    gamma: float
    indices: list
    K: np.ndarray
    P: np.ndarray = None

    def __post_init__(self):
        self.indices = [tuple(int(e) for e in a) for a in self.indices]
        self.K = np.ascontiguousarray(self.K, dtype=float)
        self._exps = exponent_table(self.indices)

    @property
    def r(self):
        return self._exps.shape[1]

    def truncate(self, p):
        """Expansion restricted to ``|alpha| <= p``."""
        if p > self.p:
            raise ValueError(f"cannot raise order {self.p} to {p}")
        keep = [i for i, a in enumerate(self.indices) if sum(a) <= p]
        P = None if self.P is None else self.P[keep]
        return FeedbackExpansion(p, self.gamma, [self.indices[i] for i in keep], self.K[keep], P)

    def coefficient(self, alpha):
        return self.P[self.indices.index(tuple(alpha))]

    def gain(self, rho):
        """``sum rho^alpha K_alpha`` (m x n)."""
        mono = _kernels.monomials(self._exps, np.asarray(rho, dtype=float))
        return np.tensordot(mono, self.K, axes=1)

    def riccati_matrix(self, rho):
        mono = _kernels.monomials(self._exps, np.asarray(rho, dtype=float))
        return np.tensordot(mono, self.P, axes=1)


def _state_space(A0, A, B, M):
    if M is None:
        return A0, A, B
    Minv = np.linalg.inv(M)
    return Minv @ A0, np.einsum("ij,ajk->aik", Minv, A), Minv @ B


def compute_expansion_coefficients(lpv: LpvCoefficients, B, C, gamma=1.0, p=2, M=None, *,
                                   rhs="dense", keep_P=True):
    """Solve the Riccati/Lyapunov cascade for all ``|alpha| <= p``.

    ``p = 0`` is the LQR about the origin.  For ``|alpha| = 2`` the
    right-hand side sums over ordered pairs ``(beta, delta)`` with
    ``beta + delta = alpha``, so a repeated index ``2 e_i`` contributes one
    pair.  ``rhs="ldl"`` assembles the Lyapunov right-hand sides from LDL^T
    factors instead of dense products.
    """
    if p not in (0, 1, 2):
        raise ValueError("order p must be 0, 1 or 2")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if rhs not in ("dense", "ldl"):
        raise ValueError(f"unknown rhs mode {rhs!r}")
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    A0, Aj, Bs = _state_space(lpv.A0, lpv.A, B, M)
    n, r = A0.shape[0], Aj.shape[0]
    Bg = Bs / np.sqrt(gamma)
    G = Bg @ Bg.T
    indices = enumerate_multiindices(r, p)
    zero = indices[0]
    try:
        P0 = solve_care(A0, Bg, C)
    except np.linalg.LinAlgError as exc:
        raise ExpansionError(zero, exc) from exc
    F = A0 - G @ P0
    Ps = {zero: P0}
    Z0 = psd_factor(P0) if rhs == "ldl" else None
    A_astar = np.zeros((n, n))  # second-order coefficients of A(rho) vanish

    for alpha in indices[1:]:
        support = [i for i, e in enumerate(alpha) for _ in range(e)]
        try:
            if len(support) == 1:
                Aa = Aj[support[0]]
                if rhs == "ldl":
                    R = build_ldl_rhs_order1(Z0, Aa).product()
                else:
                    R = -Aa.T @ P0 - P0 @ Aa
            else:
                i, j = support
                bi, bj = _unit(r, i), _unit(r, j)
                Pi, Pj = Ps[bi], Ps[bj]
                if rhs == "ldl":
                    Li, Lj = ldl_from_symmetric(Pi), ldl_from_symmetric(Pj)
                    R = build_ldl_rhs_order2(Z0, A_astar, Li.L, Li.D, Lj.L, Lj.D,
                                             Bg.T @ Pi, Bg.T @ Pj, Aj[i], Aj[j], Bg,
                                             repeated=(i == j)).product()
                else:
                    R = -P0 @ A_astar - A_astar.T @ P0
                    pairs = [(i, j)] if i == j else [(i, j), (j, i)]
                    for b, d in pairs:
                        Pb, Pd = Ps[_unit(r, b)], Ps[_unit(r, d)]
                        R -= Pb @ Aj[d] + Aj[d].T @ Pb - Pb @ G @ Pd
            # F^T P + P F = R  <=>  Q = -R
            Ps[alpha] = solve_lyapunov(F, -R)
        except np.linalg.LinAlgError as exc:
            raise ExpansionError(alpha, exc) from exc

    P = np.stack([Ps[a] for a in indices])
    K = np.einsum("im,aij->amj", Bs, P)
    log.info("solved %d matrix equations (r=%d, p=%d, gamma=%g)", len(indices), r, p, gamma)
    return FeedbackExpansion(p, float(gamma), indices, K, P if keep_P else None)


def _unit(r, i):
    e = [0] * r
    e[i] = 1
    return tuple(e)


def expanded_feedback(exp: FeedbackExpansion, rho, v):
    """``u = -(1/gamma) sum_alpha rho^alpha K_alpha v``."""
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    return -_kernels.feedback_sum(exp.K, exp._exps, rho, v) / exp.gamma


def sdre_gain_matrix(A, B, C, gamma=1.0, M=None):
    """Exact SDRE solution P for a frozen coefficient A (mass form if M given)."""
    if M is not None:
        A = np.linalg.solve(M, A)
        B = np.linalg.solve(M, B)
    return solve_care(A, B / np.sqrt(gamma), C), B


def exact_sdre_feedback(sys, model, v, gamma=1.0):
    """SDRE feedback with a per-state Riccati solve.

    With a model the coefficient is the LPV approximation
    ``A~(decode(encode(v)))``; with ``model=None`` it is ``A~(v)`` itself.
    """
    v = np.asarray(v, dtype=float)
    if model is None:
        A = evaluate_coefficient(sys, v)
    else:
        A = evaluate_lpv_matrix(sys, model, ae.encode(model, v)[1])
    try:
        P, Bs = sdre_gain_matrix(A, sys.B, sys.C, gamma, sys.M)
    except RiccatiError as exc:
        raise SdreFailure(v, exc) from exc
    return -(Bs.T @ (P @ v)) / gamma


def expansion_residual(exp: FeedbackExpansion, lpv: LpvCoefficients, B, C, gamma, rho, M=None):
    """Riccati residual of the truncated series at the linear LPV coefficient."""
    A0, Aj, Bs = _state_space(lpv.A0, lpv.A, np.atleast_2d(B), M)
    A = A0 + np.tensordot(np.asarray(rho, dtype=float), Aj, axes=1)
    return riccati_residual(exp.riccati_matrix(rho), A, Bs / np.sqrt(gamma), np.atleast_2d(C))


def residual_slope(exp, lpv, B, C, gamma, direction, ts=None, M=None):
    """Least-squares log-log slope of the residual along ``rho = t * direction``."""
    ts = np.logspace(-3, -1, 7) if ts is None else np.asarray(ts, dtype=float)
    res = [expansion_residual(exp, lpv, B, C, gamma, t * np.asarray(direction), M) for t in ts]
    return float(np.polyfit(np.log(ts), np.log(res), 1)[0])


# controllers for closed-loop simulation: callables v -> u


class ExpansionController:
    """Expanded SDRE feedback with the encoder in the loop."""

    def __init__(self, model, expansion, order=None):
        self.model = model
        self.expansion = expansion if order is None else expansion.truncate(order)

    @property
    def gamma(self):
        return self.expansion.gamma

    def __call__(self, v):
        return expanded_feedback(self.expansion, ae.encode(self.model, v)[1], v)


class ExactSdreController:
    def __init__(self, sys, gamma=1.0, model=None):
        self.sys, self.gamma, self.model = sys, gamma, model

    def __call__(self, v):
        return exact_sdre_feedback(self.sys, self.model, v, self.gamma)
