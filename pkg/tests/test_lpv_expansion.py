import numpy as np

from paesdre import autoencoder as ae
from paesdre.lpv_expansion import (clustering_jacobian_fd, evaluate_lpv_matrix,
                                   lpv_coefficients_first_order)
from paesdre.sdc_model import evaluate_coefficient, make_burgers_benchmark, rhs


def _setup(q=3, seed=0):
    sys = make_burgers_benchmark(n_grid=16, reaction=1.0)
    model = ae.init_model(sys.n, 3, q, seed=seed)
    model.clu = [3 * w for w in model.clu]
    return sys, model


def test_coefficients_match_definition(rng):
    sys, model = _setup()
    lpv = lpv_coefficients_first_order(sys, model)
    np.testing.assert_array_equal(lpv.A0, sys.A_lin)
    for j in range(model.r):
        w = model.W[:, j]
        np.testing.assert_allclose(lpv.A[j], evaluate_coefficient(sys, w) - sys.A_lin, atol=1e-14)
    model.W[:] = 0
    lpv0 = lpv_coefficients_first_order(sys, model)
    assert np.all(lpv0.A == 0)


def test_evaluate_lpv_matrix(rng):
    sys, model = _setup()
    np.testing.assert_array_equal(evaluate_lpv_matrix(sys, model, np.zeros(3)), sys.A_lin)
    rho = rng.uniform(size=3)
    np.testing.assert_array_equal(evaluate_lpv_matrix(sys, model, rho),
                                  evaluate_coefficient(sys, ae.decode(model, rho)))
    lin, lin_model = _setup(q=1)
    lpv = lpv_coefficients_first_order(lin, lin_model)
    np.testing.assert_allclose(evaluate_lpv_matrix(lin, lin_model, rho), lpv.evaluate(rho),
                               rtol=1e-13, atol=1e-13)


def test_truncation_error_is_third_order(rng):
    sys, model = _setup(seed=4)
    lpv = lpv_coefficients_first_order(sys, model)
    d = rng.uniform(size=3)
    d /= np.linalg.norm(d)
    ratios = []
    for t in (1e-2, 5e-3, 2.5e-3, 1.25e-3):
        E = evaluate_lpv_matrix(sys, model, t * d) - lpv.evaluate(t * d)
        ratios.append(np.linalg.norm(E) / t**3)
    assert max(ratios) / min(ratios) < 1.3


def test_composition_reproduces_rhs_on_reconstructed_states(rng):
    sys, model = _setup()
    v = 0.3 * rng.standard_normal(sys.n)
    rho = ae.encode(model, v)[1]
    vt = ae.decode(model, rho)
    u = rng.standard_normal(sys.m)
    lhs = evaluate_lpv_matrix(sys, model, rho) @ vt + sys.B @ u
    np.testing.assert_allclose(lhs, rhs(sys, vt, u), rtol=1e-12, atol=1e-12)


def test_clustering_jacobian_random_draws():
    for seed in range(20):
        model = ae.init_model(10, 4, 3, seed=seed)
        assert np.abs(clustering_jacobian_fd(model, np.zeros(4), 1e-5)).max() <= 1e-6
