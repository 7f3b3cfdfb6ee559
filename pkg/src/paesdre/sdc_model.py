"""Quadratic systems in state-dependent-coefficient form.

A system is ``M dv/dt = A(v) v + B u``, ``y = C v`` with the coefficient
``A(v) = A_lin + H(v, .)`` affine in ``v``.  The bilinear part is kept in
coordinate (COO) form ``(H(v, w))_i = sum val * v[j] * w[k]`` so that
stencil-type nonlinearities cost O(n) per evaluation.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from . import _kernels


class DimensionError(ValueError):
    pass


def _check_vec(x, n, name):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != n:
        raise DimensionError(f"{name} must have shape ({n},), got {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class QuadraticSdcSystem:
    """Quadratic system with mass matrix and first-argument SDC loading.

    Parameters
    ----------
    M : (n, n) symmetric positive definite mass matrix.
    A_lin : (n, n) constant linear coefficient.
    H : tuple ``(rows, cols_v, cols_w, vals)`` of the bilinear form.
    B : (n, m) input map.
    C : (l, n) output map.
    """

    M: np.ndarray
    A_lin: np.ndarray
    H: tuple
    B: np.ndarray
    C: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.A_lin.shape[0]
        if self.A_lin.shape != (n, n) or self.M.shape != (n, n):
            raise DimensionError("A_lin and M must be square of equal size")
        if self.B.ndim != 2 or self.B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows")
        if self.C.ndim != 2 or self.C.shape[1] != n:
            raise DimensionError(f"C must have {n} columns")
        if not np.allclose(self.M, self.M.T, rtol=0, atol=1e-14 * np.abs(self.M).max()):
            raise ValueError("mass matrix is not symmetric")
        try:
            chol = spla.cho_factor(self.M)
        except np.linalg.LinAlgError as exc:
            raise ValueError("mass matrix is not positive definite") from exc
        rows, cols_v, cols_w, vals = self.H
        rows = np.ascontiguousarray(rows, dtype=np.int64)
        cols_v = np.ascontiguousarray(cols_v, dtype=np.int64)
        cols_w = np.ascontiguousarray(cols_w, dtype=np.int64)
        vals = np.ascontiguousarray(vals, dtype=float)
        if not (rows.shape == cols_v.shape == cols_w.shape == vals.shape):
            raise DimensionError("bilinear form index/value arrays differ in length")
        if vals.size and (max(rows.max(), cols_v.max(), cols_w.max()) >= n or
                          min(rows.min(), cols_v.min(), cols_w.min()) < 0):
            raise DimensionError("bilinear form index out of range")
        object.__setattr__(self, "H", (rows, cols_v, cols_w, vals))
        object.__setattr__(self, "_chol", chol)

    @property
    def n(self):
        return self.A_lin.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def l(self):  # noqa: E743
        return self.C.shape[0]

    def bilinear(self, v, w):
        """Evaluate H(v, w)."""
        v = _check_vec(v, self.n, "v")
        w = _check_vec(w, self.n, "w")
        return _kernels.bilinear_apply(*self.H, v, w, self.n)

    def bilinear_matrix(self, v):
        """Matrix of the linear map w -> H(v, w)."""
        v = _check_vec(v, self.n, "v")
        return _kernels.bilinear_matrix(*self.H, v, self.n)

    def mass_solve(self, X):
        """Return M^{-1} X."""
        return spla.cho_solve(self._chol, X)

    def dense_H(self):
        """Stack of n matrices H_i with (H(v, w))_i = v^T H_i w."""
        out = np.zeros((self.n, self.n, self.n))
        rows, cols_v, cols_w, vals = self.H
        np.add.at(out, (rows, cols_v, cols_w), vals)
        return out

    @classmethod
    def from_dense(cls, M, A_lin, H_stack, B, C, meta=None):
        H_stack = np.asarray(H_stack, dtype=float)
        rows, cols_v, cols_w = np.nonzero(H_stack)
        vals = H_stack[rows, cols_v, cols_w]
        return cls(np.asarray(M, float), np.asarray(A_lin, float),
                   (rows, cols_v, cols_w, vals),
                   np.atleast_2d(np.asarray(B, float)),
                   np.atleast_2d(np.asarray(C, float)), dict(meta or {}))


def evaluate_coefficient(sys, v):
    """State-dependent coefficient A_lin + H(v, .)."""
    return sys.A_lin + sys.bilinear_matrix(v)


def rhs(sys, v, u):
    """Right-hand side A(v) v + B u (before the mass solve)."""
    v = _check_vec(v, sys.n, "v")
    u = _check_vec(u, sys.m, "u")
    return sys.A_lin @ v + sys.bilinear(v, v) + sys.B @ u


def m_norm(sys, v):
    v = _check_vec(v, sys.n, "v")
    return float(np.sqrt(max(v @ (sys.M @ v), 0.0)))


def _d1_d2(n, h, boundary):
    """Central first and second difference matrices."""
    e = np.ones(n - 1)
    D1 = (np.diag(e, 1) - np.diag(e, -1)) / (2 * h)
    D2 = (np.diag(e, 1) + np.diag(e, -1) - 2 * np.eye(n)) / h**2
    if boundary == "periodic":
        D1[0, -1], D1[-1, 0] = -1 / (2 * h), 1 / (2 * h)
        D2[0, -1] = D2[-1, 0] = 1 / h**2
    return D1, D2


def _indicator(x, lo, hi):
    return ((x >= lo) & (x <= hi)).astype(float)


def make_burgers_benchmark(n_grid=64, viscosity=0.05, growth=None, *,
                           boundary="dirichlet", input_gain=1.0,
                           actuators=((0.15, 0.3), (0.6, 0.75)),
                           sensors=((0.35, 0.5), (0.8, 0.95)),
                           growth_margin=None, reaction=0.0, convection="conservative"):
    """Finite-difference viscous Burgers equation with linear growth.

    The grid holds ``n_grid`` nodes on the unit interval (interior nodes for
    homogeneous Dirichlet conditions).  In mass form with ``M = h I``::

        M dv/dt = h (nu D2 + lambda I) v - (h/2) D1 (v * v) + h kappa v * v + B u

    so that ``H(v, w) = -(h/2) D1 (v * w) + h kappa v * w``.  With
    ``convection="advective"`` the transport term is ``-h v * (D1 w)``
    instead.  The conservative form with central differences leaves the
    energy unchanged; the reaction coefficient ``kappa`` (default 0) adds a
    nonlinearity that can drive finite-time blow-up.  Actuators are
    unit-mass indicator functions (``M^{-1} B`` integrates to
    ``input_gain``); sensors average the state over a subinterval.

    If ``growth`` is None it is set to ``|mu_1| + growth_margin``, where
    ``mu_1`` is the least negative eigenvalue of ``nu D2``; the origin then
    has exactly one unstable mode with rate ``growth_margin``.
    """
    if convection not in ("conservative", "advective"):
        raise ValueError(f"unknown convection form {convection!r}")
    if boundary not in ("dirichlet", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    if n_grid < 8:
        raise ValueError("n_grid must be at least 8")
    if boundary == "dirichlet":
        h = 1.0 / (n_grid + 1)
        x = h * np.arange(1, n_grid + 1)
    else:
        h = 1.0 / n_grid
        x = h * np.arange(n_grid)
    B = np.column_stack([_indicator(x, lo, hi) for lo, hi in actuators])
    C = np.vstack([_indicator(x, lo, hi) for lo, hi in sensors])
    supp = np.vstack([B.T, C])
    if np.any(supp.sum(axis=1) == 0) or np.any(supp.sum(axis=0) > 1):
        raise ValueError(f"n_grid={n_grid} cannot host disjoint actuator and sensor supports")
    # M^{-1} B = gain * chi / |supp| with |supp| = #nodes * h
    B = input_gain * B / B.sum(axis=0)
    C = C / C.sum(axis=1, keepdims=True)

    D1, D2 = _d1_d2(n_grid, h, boundary)
    if growth is None:
        mu1 = np.linalg.eigvalsh(viscosity * D2).max()
        growth = -mu1 + (1.0 if growth_margin is None else growth_margin)
    M = h * np.eye(n_grid)
    A_lin = h * (viscosity * D2 + growth * np.eye(n_grid))

    diag = np.arange(n_grid)
    if convection == "advective":
        # (H(v, w))_i = h v_i sum_k (-D1[i, k]) w_k
        rows, cols = np.nonzero(D1)
        H = (rows, rows.copy(), cols, -h * D1[rows, cols])
    else:
        # (H(v, w))_i = -(h/2) sum_k D1[i, k] v_k w_k
        rows, cols = np.nonzero(D1)
        H = (rows, cols, cols.copy(), -0.5 * h * D1[rows, cols])
    if reaction:
        H = tuple(np.concatenate([a, b]) for a, b in
                  zip(H, (diag, diag, diag, np.full(n_grid, h * reaction))))
    meta = dict(n_grid=n_grid, viscosity=viscosity, growth=float(growth),
                boundary=boundary, h=h, input_gain=input_gain, reaction=reaction,
                convection=convection,
                actuators=[list(a) for a in actuators], sensors=[list(s) for s in sensors])
    return QuadraticSdcSystem(M, A_lin, H, B, C, meta)


def spectral_abscissa(A, M=None):
    if M is None:
        return float(np.linalg.eigvals(A).real.max())
    return float(spla.eigvals(A, M).real.max())


def unstable_controllable(sys, tol=1e-9):
    """Rank test of the controllability matrix on the unstable eigenspace."""
    A = sys.mass_solve(sys.A_lin)
    B = sys.mass_solve(sys.B)
    lam = np.linalg.eigvals(A)
    ok = True
    for i in np.flatnonzero(lam.real >= 0):
        # Hautus test for each unstable eigenvalue
        K = np.hstack([lam[i] * np.eye(sys.n) - A, B])
        ok &= np.linalg.matrix_rank(K, tol=tol * np.linalg.norm(K)) == sys.n
    return bool(ok)
