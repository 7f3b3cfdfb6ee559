"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``PAESDRE_DISABLE_NUMBA`` is unset (or ``0``).  Both variants are
always importable under explicit names so tests and the benchmark can
compare them.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("PAESDRE_DISABLE_NUMBA", "0").lower() in (
    "",
    "0",
    "false",
    "no",
)


# sparse bilinear form  (H(v, w))_i = sum_t val_t * v[j_t] * w[k_t]  (i_t = i)


def bilinear_apply_numpy(rows, cols_v, cols_w, vals, v, w, n):
    return np.bincount(rows, weights=vals * v[cols_v] * w[cols_w], minlength=n)


def bilinear_matrix_numpy(rows, cols_v, cols_w, vals, v, n):
    out = np.zeros((n, n))
    np.add.at(out, (rows, cols_w), vals * v[cols_v])
    return out


def feedback_sum_numpy(gains, exponents, rho, v):
    # rho ** exponents with 0 ** 0 == 1
    mono = np.prod(np.power(rho[None, :], exponents), axis=1)
    return np.einsum("a,amn,n->m", mono, gains, v)


def monomials_numpy(exponents, rho):
    return np.prod(np.power(rho[None, :], exponents), axis=1)


if HAVE_NUMBA:

    @njit(cache=True)
    def bilinear_apply_numba(rows, cols_v, cols_w, vals, v, w, n):
        out = np.zeros(n)
        for t in range(vals.shape[0]):
            out[rows[t]] += vals[t] * v[cols_v[t]] * w[cols_w[t]]
        return out

    @njit(cache=True)
    def bilinear_matrix_numba(rows, cols_v, cols_w, vals, v, n):
        out = np.zeros((n, n))
        for t in range(vals.shape[0]):
            out[rows[t], cols_w[t]] += vals[t] * v[cols_v[t]]
        return out

    @njit(cache=True)
    def monomials_numba(exponents, rho):
        na, r = exponents.shape
        out = np.ones(na)
        for a in range(na):
            for i in range(r):
                e = exponents[a, i]
                for _ in range(e):
                    out[a] *= rho[i]
        return out

    @njit(cache=True)
    def feedback_sum_numba(gains, exponents, rho, v):
        na, m, n = gains.shape
        mono = monomials_numba(exponents, rho)
        out = np.zeros(m)
        for a in range(na):
            c = mono[a]
            if c == 0.0:
                continue
            for i in range(m):
                s = 0.0
                for j in range(n):
                    s += gains[a, i, j] * v[j]
                out[i] += c * s
        return out

else:  # pragma: no cover
    bilinear_apply_numba = bilinear_apply_numpy
    bilinear_matrix_numba = bilinear_matrix_numpy
    monomials_numba = monomials_numpy
    feedback_sum_numba = feedback_sum_numpy


if USE_NUMBA:
    bilinear_apply = bilinear_apply_numba
    bilinear_matrix = bilinear_matrix_numba
    monomials = monomials_numba
    feedback_sum = feedback_sum_numba
else:
    bilinear_apply = bilinear_apply_numpy
    bilinear_matrix = bilinear_matrix_numpy
    monomials = monomials_numpy
    feedback_sum = feedback_sum_numpy
