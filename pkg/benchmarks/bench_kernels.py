"""Compare the numba and pure-numpy kernel paths.

Run ``python benchmarks/bench_kernels.py``.  Kernel timings call both
implementations directly; the closed-loop timing runs a subprocess per path
with ``PAESDRE_DISABLE_NUMBA`` set accordingly.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from paesdre import _kernels as K
from paesdre.multiindex import exponent_table, enumerate_multiindices
from paesdre.sdc_model import make_burgers_benchmark

CLOSED_LOOP = """
import time, numpy as np
from paesdre import autoencoder as ae
from paesdre.lpv_expansion import lpv_coefficients_first_order
from paesdre.sdc_model import make_burgers_benchmark
from paesdre.sdre_control import ExpansionController, compute_expansion_coefficients
from paesdre.simulation import simulate_closed_loop
sys_ = make_burgers_benchmark(n_grid={n}, reaction=1.0)
model = ae.init_model(sys_.n, 5, 3, seed=0)
exp = compute_expansion_coefficients(lpv_coefficients_first_order(sys_, model), sys_.B, sys_.C, 1.0, 2, sys_.M)
ctrl = ExpansionController(model, exp)
simulate_closed_loop(sys_, ctrl, 0.3, 0.31)  # warm-up and jit
t0 = time.perf_counter()
traj = simulate_closed_loop(sys_, ctrl, 0.3, {t_end})
assert not traj.blowup, "benchmark trajectory blew up"
print(time.perf_counter() - t0)
"""


def bench(fn, number):
    return min(timeit.repeat(fn, number=number, repeat=5)) / number


def kernel_table(n, number):
    sys = make_burgers_benchmark(n_grid=n, reaction=1.0)
    rows, cv, cw, vals = (np.ascontiguousarray(a) for a in sys.H)
    rng = np.random.default_rng(0)
    v, w = rng.standard_normal(n), rng.standard_normal(n)
    exps = exponent_table(enumerate_multiindices(5, 2))
    gains = rng.standard_normal((exps.shape[0], 2, n))
    rho = rng.uniform(size=5) / 5
    cases = {
        "bilinear_apply": (lambda: K.bilinear_apply_numpy(rows, cv, cw, vals, v, w, n),
                           lambda: K.bilinear_apply_numba(rows, cv, cw, vals, v, w, n)),
        "bilinear_matrix": (lambda: K.bilinear_matrix_numpy(rows, cv, cw, vals, v, n),
                            lambda: K.bilinear_matrix_numba(rows, cv, cw, vals, v, n)),
        "feedback_sum": (lambda: K.feedback_sum_numpy(gains, exps, rho, v),
                         lambda: K.feedback_sum_numba(gains, exps, rho, v)),
    }
    out = []
    for name, (f_np, f_nb) in cases.items():
        np.testing.assert_allclose(f_np(), f_nb(), rtol=1e-12, atol=1e-12)
        out.append((name, bench(f_np, number), bench(f_nb, number)))
    return out


def closed_loop(n, t_end, disable):
    env = dict(os.environ, PAESDRE_DISABLE_NUMBA="1" if disable else "0")
    code = CLOSED_LOOP.format(n=n, t_end=t_end)
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    return float(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, nargs="+", default=[64, 256])
    parser.add_argument("--number", type=int, default=2000)
    parser.add_argument("--t-end", type=float, default=2.0)
    args = parser.parse_args(argv)
    if not K.HAVE_NUMBA:
        sys.exit("numba is not installed")
    print(f"{'n':>5} {'kernel':<16} {'numpy [us]':>11} {'numba [us]':>11} {'speedup':>8}")
    for n in args.n:
        for name, t_np, t_nb in kernel_table(n, args.number):
            print(f"{n:>5} {name:<16} {1e6 * t_np:>11.2f} {1e6 * t_nb:>11.2f} {t_np / t_nb:>8.1f}")
    print(f"\nclosed loop, expansion controller p=2, t in [0, {args.t_end}]")
    for n in args.n:
        t_np = closed_loop(n, args.t_end, True)
        t_nb = closed_loop(n, args.t_end, False)
        print(f"{n:>5} numpy {t_np:.3f} s  numba {t_nb:.3f} s  speedup {t_np / t_nb:.2f}")


if __name__ == "__main__":
    main()
