"""Time integration, performance index and reconstruction errors.

The stepper is semi-implicit Euler: the linear part is implicit, the
quadratic term and the input are explicit,

    (M - dt A_lin) v_{k+1} = M v_k + dt (H(v_k, v_k) + B u_k).

The input is held constant over a step (zero-order hold at the left end).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from . import autoencoder as ae
from .sdc_model import DimensionError

log = logging.getLogger(__name__)

BLOWUP = math.inf
DEFAULT_DT = 0.5 / 400
BLOWUP_FACTOR = 1e6


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    mnorms: np.ndarray
    blowup: bool = False
    blowup_time: float = None
    meta: dict = field(default_factory=dict)

    @property
    def n_steps(self):
        return self.times.shape[0] - 1


def test_input(t, m=2):
    """``u(t) = (sin t, 0, ..., 0)``."""
    u = np.zeros(m)
    u[0] = math.sin(t)
    return u


class SemiImplicitStepper:
    """Reusable stepper with the factorized step matrix."""

    def __init__(self, sys, dt):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.sys, self.dt = sys, dt
        S = sys.M - dt * sys.A_lin
        self._lu = spla.lu_factor(S, check_finite=True)
        if np.abs(np.diag(self._lu[0])).min() <= 1e-14 * np.abs(S).max():
            raise np.linalg.LinAlgError("singular step matrix M - dt A_lin")

    def step(self, v, u):
        sys = self.sys
        rhs = sys.M @ v + self.dt * (sys.bilinear(v, v) + sys.B @ u)
        return spla.lu_solve(self._lu, rhs, check_finite=False)


def step_semi_implicit(sys, v, u, dt):
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    if v.shape != (sys.n,) or u.shape != (sys.m,):
        raise DimensionError("state or input has wrong length")
    return SemiImplicitStepper(sys, dt).step(v, u)


def _grid(t_end, dt):
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    N = int(round(t_end / dt))
    if N < 1 or abs(N * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    return N, dt * np.arange(N + 1)


def _integrate(sys, input_at, t_end, dt, v0, t_ref, blowup_factor):
    N, times = _grid(t_end, dt)
    stepper = SemiImplicitStepper(sys, dt)
    X = np.zeros((sys.n, N + 1))
    U = np.zeros((sys.m, N))
    nrm = np.zeros(N + 1)
    v = np.zeros(sys.n) if v0 is None else np.array(v0, dtype=float)
    X[:, 0] = v
    nrm[0] = math.sqrt(max(v @ sys.M @ v, 0.0))
    ref = nrm[0]
    blown, t_blow, reason = False, None, None
    for k in range(N):
        try:
            u = input_at(k, times[k], v)
        except np.linalg.LinAlgError as exc:
            blown, t_blow, reason = True, float(times[k]), f"controller failure: {exc}"
            X, U, nrm, times = X[:, : k + 1], U[:, :k], nrm[: k + 1], times[: k + 1]
            break
        U[:, k] = u
        with np.errstate(over="ignore", invalid="ignore"):
            v = stepper.step(v, u)
            mn = math.sqrt(max(v @ sys.M @ v, 0.0)) if np.all(np.isfinite(v)) else math.inf
        X[:, k + 1] = v
        nrm[k + 1] = mn
        if times[k + 1] <= t_ref + 0.5 * dt:
            ref = max(ref, mn)
        if not math.isfinite(mn) or (times[k + 1] > t_ref + 0.5 * dt and ref > 0
                                     and mn > blowup_factor * ref):
            blown, t_blow, reason = True, float(times[k + 1]), "state norm exceeded threshold"
            X, U, nrm, times = X[:, : k + 2], U[:, : k + 1], nrm[: k + 2], times[: k + 2]
            break
    meta = {"dt": dt, "t_end": t_end, "blowup_reference": ref}
    if reason:
        meta["blowup_reason"] = reason
    return Trajectory(times, X, U, sys.C @ X, nrm, blown, t_blow, meta)


def simulate_open_loop(sys, u_fn=None, t_end=0.5, dt=DEFAULT_DT, v0=None, *,
                       blowup_window=0.5, blowup_factor=BLOWUP_FACTOR):
    """Open-loop run from ``v0`` (default 0) with input ``u_fn(t)``.

    Blow-up is flagged once the M-norm exceeds ``blowup_factor`` times its
    maximum over ``[0, blowup_window]``.
    """
    if u_fn is None:
        def u_fn(t):
            return test_input(t, sys.m)
    return _integrate(sys, lambda k, t, v: u_fn(t), t_end, dt, v0,
                      min(blowup_window, t_end), blowup_factor)


def simulate_closed_loop(sys, controller, t_s, t_end, dt=DEFAULT_DT, u_fn=None, v0=None, *,
                         blowup_factor=BLOWUP_FACTOR):
    """Test input on ``t < t_s``, then ``u = controller(v)`` each step.

    ``controller`` may be None (input switched off).  Blow-up reference is
    the M-norm maximum over the startup window ``[0, t_s]``.
    """
    if t_s > t_end:
        raise ValueError("t_s must not exceed t_end")
    if u_fn is None:
        def u_fn(t):
            return test_input(t, sys.m)
    zero = np.zeros(sys.m)

    def input_at(k, t, v):
        if t < t_s - 1e-12:
            return u_fn(t)
        return zero if controller is None else controller(v)

    traj = _integrate(sys, input_at, t_end, dt, v0, t_s, blowup_factor)
    traj.meta["t_s"] = t_s
    return traj


def performance_index(traj, controller, t_s, t_e=None):
    """``(1/t_e) (int_{t_s}^{t_e} |u(t)|^2 dt)^{1/2}`` by the trapezoidal rule.

    ``u`` is the controller output at the stored states.  Returns ``BLOWUP``
    (infinity) for a blown-up trajectory.
    """
    if traj.blowup:
        return BLOWUP
    if t_e is None:
        t_e = float(traj.times[-1])
    if traj.times[-1] < t_e - 1e-9:
        raise ValueError("trajectory does not reach t_e")
    sel = (traj.times >= t_s - 1e-12) & (traj.times <= t_e + 1e-12)
    t = traj.times[sel]
    if t.size < 2:
        return 0.0
    g2 = np.array([float(np.sum(np.square(controller(x)))) for x in traj.states[:, sel].T])
    return math.sqrt(np.trapezoid(g2, t)) / t_e


def reconstruction_error_series(model, snapshots, M=None, *, first_order=False):
    """Pointwise M-norm reconstruction errors and their average.

    ``model`` is a PolytopicAutoencoder or a PodBasis.  With
    ``first_order=True`` the autoencoder decoder is replaced by its
    linearization ``sum_j rho_j w_j``.
    """
    S = np.asarray(snapshots, dtype=float)
    if isinstance(model, ae.PodBasis):
        R = model.project(S)
    elif first_order:
        R = ae.first_order_decode(model, ae.encode(model, S)[1])
    else:
        R = ae.reconstruct(model, S)
    E = R - S
    ME = E if M is None else M @ E
    err = np.sqrt(np.maximum((E * ME).sum(axis=0), 0.0))
    return err, float(err.mean())
