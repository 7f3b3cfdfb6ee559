"""Quasi-LPV coefficient rho -> A(rho) = A~(decode(rho)) and its expansion."""

from dataclasses import dataclass

import numpy as np

from . import autoencoder as ae
from .sdc_model import evaluate_coefficient


@dataclass
class LpvCoefficients:
    """``A(rho) ~ A0 + sum_j rho_j A_j`` in mass form (same M as the source system)."""

    A0: np.ndarray
    A: np.ndarray  # (r, n, n)

    @property
    def r(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A0.shape[0]

    def evaluate(self, rho):
        return self.A0 + np.tensordot(np.asarray(rho, dtype=float), self.A, axes=1)


def lpv_coefficients_first_order(sys, model):
    """``A0 = A_lin`` and ``A_j = H(w_j, .)`` for the first r decoder columns.

    The second-order terms vanish because the clustering Jacobian is zero at
    the origin, so this is also the second-order expansion.
    """
    if model.n != sys.n:
        raise ValueError(f"model has n={model.n}, system has n={sys.n}")
    A = np.stack([sys.bilinear_matrix(model.W[:, j]) for j in range(model.r)])
    return LpvCoefficients(sys.A_lin.copy(), A)


def evaluate_lpv_matrix(sys, model, rho):
    return evaluate_coefficient(sys, ae.decode(model, rho))


def clustering_jacobian_fd(model, rho, step=1e-5):
    """Central finite-difference Jacobian (q x r) of the clustering network."""
    if step <= 0:
        raise ValueError("step must be positive")
    rho = np.asarray(rho, dtype=float)
    E = step * np.eye(model.r)
    plus = ae.cluster_weights(model, rho[None, :] + E)
    minus = ae.cluster_weights(model, rho[None, :] - E)
    return (plus - minus).T / (2 * step)
