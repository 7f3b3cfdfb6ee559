import numpy as np
import pytest

from paesdre import autoencoder as ae
from paesdre import io
from paesdre.lpv_expansion import lpv_coefficients_first_order
from paesdre.sdc_model import make_burgers_benchmark
from paesdre.sdre_control import compute_expansion_coefficients
from paesdre.simulation import simulate_closed_loop, simulate_open_loop


@pytest.fixture(scope="module")
def small():
    sys = make_burgers_benchmark(n_grid=12, reaction=1.0)
    model = ae.init_model(sys.n, 2, 3, seed=1, input_scale=0.3)
    return sys, model


def test_system_round_trip(tmp_path, small):
    sys, _ = small
    io.save_system(tmp_path / "s.json", sys)
    back = io.load_system(tmp_path / "s.json")
    v, w = np.linspace(-1, 1, sys.n), np.cos(np.arange(sys.n))
    np.testing.assert_allclose(back.bilinear(v, w), sys.bilinear(v, w), rtol=1e-14, atol=1e-15)
    for name in ("M", "A_lin", "B", "C"):
        np.testing.assert_array_equal(getattr(back, name), getattr(sys, name))
    d = io.read_json(tmp_path / "s.json")
    H = np.array(d["H"])
    assert H.shape == (sys.n, sys.n, sys.n)
    # (H(v, w))_i = v^T H_i w
    np.testing.assert_allclose(np.einsum("j,ijk,k->i", v, H, w), sys.bilinear(v, w), atol=1e-15)


def test_model_round_trip_is_exact(tmp_path, small):
    sys, model = small
    io.save_model(tmp_path / "m.json", model)
    back = io.load_model(tmp_path / "m.json")
    for k, p in model.params().items():
        np.testing.assert_array_equal(back.params()[k], p)
    assert (back.n, back.r, back.q, back.a, back.input_scale) == (model.n, model.r, model.q, model.a,
                                                                  model.input_scale)
    pod = ae.pod_basis(np.random.default_rng(0).standard_normal((sys.n, 9)), 3, sys.M)
    io.save_model(tmp_path / "p.json", pod)
    pb = io.load_model(tmp_path / "p.json")
    np.testing.assert_array_equal(pb.V, pod.V)
    np.testing.assert_array_equal(pb.M, pod.M)


def test_expansion_and_lpv_round_trip(tmp_path, small):
    sys, model = small
    lpv = lpv_coefficients_first_order(sys, model)
    exp = compute_expansion_coefficients(lpv, sys.B, sys.C, 0.1, 2, sys.M)
    io.write_json(tmp_path / "e.json", io.expansion_to_dict(exp, include_P=True))
    back = io.expansion_from_dict(io.read_json(tmp_path / "e.json"))
    assert back.indices == exp.indices and back.gamma == exp.gamma and back.p == 2
    np.testing.assert_array_equal(back.K, exp.K)
    np.testing.assert_array_equal(back.P, exp.P)
    no_p = io.expansion_from_dict(io.expansion_to_dict(exp))
    assert no_p.P is None
    io.write_json(tmp_path / "l.json", io.lpv_to_dict(lpv))
    lb = io.lpv_from_dict(io.read_json(tmp_path / "l.json"))
    np.testing.assert_array_equal(lb.A, lpv.A)


def test_snapshot_and_trajectory_round_trip(tmp_path, small):
    sys, _ = small
    tr = simulate_open_loop(sys, t_end=0.05, dt=0.0025)
    io.save_snapshots(tmp_path / "snap.csv", tr.states, 0.0025, 0.0, "test", "abc")
    S, meta = io.load_snapshots(tmp_path / "snap.csv")
    np.testing.assert_array_equal(S, tr.states)
    assert meta == {"n": sys.n, "N": 21, "dt": 0.0025, "t0": 0.0, "description": "test"}
    assert (tmp_path / "snap.csv").read_text().startswith("# config_hash=abc\n")

    cl = simulate_closed_loop(sys, lambda v: -v[:2], 0.02, 0.05, dt=0.0025)
    io.save_trajectory(tmp_path / "t.csv", cl, "abc")
    back = io.load_trajectory(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.times, cl.times)
    np.testing.assert_array_equal(back.outputs, cl.outputs)
    np.testing.assert_array_equal(back.inputs, cl.inputs)
    np.testing.assert_array_equal(back.mnorms, cl.mnorms)
    assert back.meta["t_s"] == 0.02 and not back.blowup


def test_csv_conventions(tmp_path):
    io.write_csv(tmp_path / "a.csv", ["x", "y"], [[0.1, float("inf")], [None, 2]], "h1", "note")
    text = (tmp_path / "a.csv").read_text()
    assert text == "# config_hash=h1; note\nx,y\n0.1,\n,2\n"
    chash, header, rows = io.read_csv(tmp_path / "a.csv")
    assert chash == "h1" and header == ["x", "y"] and rows[1] == ["", "2"]
    (tmp_path / "bad.csv").write_text("x\n1\n")
    with pytest.raises(ValueError):
        io.read_csv(tmp_path / "bad.csv")


def test_config_hash_is_stable():
    a = io.config_hash({"b": [1, 2.5], "a": None})
    assert a == io.config_hash({"a": None, "b": [1, 2.5]})
    assert a != io.config_hash({"a": None, "b": [1, 2.25]})
