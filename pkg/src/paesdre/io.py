"""JSON and CSV formats for systems, models, expansions and trajectories.

Matrices are stored as row-major nested lists.  Floats are written in
their shortest round-trip form so that every file reproduces the values
bit for bit, and files produced from identical inputs are byte identical.  Every CSV starts with a
one-line ``#`` header carrying a configuration hash.
"""

import hashlib
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .autoencoder import PodBasis, PolytopicAutoencoder
from .lpv_expansion import LpvCoefficients
from .sdc_model import QuadraticSdcSystem
from .sdre_control import FeedbackExpansion
from .simulation import Trajectory

def to_plain(obj):
    """Convert numpy containers and scalars to JSON-ready Python objects."""
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return None
        return x
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj):
    return json.dumps(to_plain(obj), sort_keys=True, indent=1) + "\n"


def config_hash(config):
    """Short stable hash of a JSON-serializable configuration."""
    blob = json.dumps(to_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (float, np.floating)):
        if math.isinf(x):
            return ""
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows, chash, note=None):
    """Write a table with a leading ``# config_hash=...`` line.

    Non-finite floats and ``None`` become empty cells.
    """
    buf = _io.StringIO()
    buf.write(f"# config_hash={chash}" + (f"; {note}" if note else "") + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path):
    """Return ``(hash, header, rows)`` with cells as strings."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# config_hash="):
        raise ValueError(f"{path}: missing config hash header")
    chash = lines[0][len("# config_hash="):].split(";")[0]
    header = lines[1].split(",")
    rows = [ln.split(",") for ln in lines[2:]]
    return chash, header, rows


def cell_float(s):
    return math.nan if s == "" else float(s)


# systems

def system_to_dict(sys):
    return {
        "kind": "quadratic_sdc_system",
        "n": sys.n, "m": sys.m, "l": sys.l,
        "M": sys.M, "A_lin": sys.A_lin, "H": sys.dense_H(),
        "B": sys.B, "C": sys.C, "meta": sys.meta,
    }


def system_from_dict(d):
    return QuadraticSdcSystem.from_dense(
        np.array(d["M"], float), np.array(d["A_lin"], float), np.array(d["H"], float),
        np.array(d["B"], float), np.array(d["C"], float), d.get("meta"))


def save_system(path, sys):
    write_json(path, system_to_dict(sys))


def load_system(path):
    return system_from_dict(read_json(path))


# models

def model_to_dict(model):
    if isinstance(model, PodBasis):
        return {"kind": "pod", "n": model.n, "r": model.r, "V": model.V,
                "singular_values": model.singular_values,
                "M": None if model.M is None else model.M}
    return {
        "kind": "pae", "n": model.n, "r": model.r, "q": model.q, "a": model.a,
        "input_scale": model.input_scale,
        "encoder": list(model.enc), "clustering": list(model.clu), "W": model.W,
        "config": model.config, "history": model.history,
    }


def model_from_dict(d):
    if d["kind"] == "pod":
        M = None if d.get("M") is None else np.array(d["M"], float)
        return PodBasis(np.array(d["V"], float).reshape(d["n"], d["r"]),
                        np.array(d["singular_values"], float), M)
    if d["kind"] != "pae":
        raise ValueError(f"unknown model kind {d['kind']!r}")
    return PolytopicAutoencoder(
        int(d["n"]), int(d["r"]), int(d["q"]),
        [np.array(w, float) for w in d["encoder"]],
        [np.array(w, float) for w in d["clustering"]],
        np.array(d["W"], float).reshape(d["n"], d["q"] * d["r"]),
        float(d["a"]), float(d["input_scale"]),
        dict(d.get("config", {})), list(d.get("history", [])))


def save_model(path, model):
    write_json(path, model_to_dict(model))


def load_model(path):
    return model_from_dict(read_json(path))


# LPV coefficients and expansions

def lpv_to_dict(lpv):
    return {"kind": "lpv", "r": lpv.r, "n": lpv.n, "A0": lpv.A0, "A": lpv.A}


def lpv_from_dict(d):
    n, r = int(d["n"]), int(d["r"])
    return LpvCoefficients(np.array(d["A0"], float), np.array(d["A"], float).reshape(r, n, n))


def expansion_to_dict(exp, include_P=False):
    d = {"kind": "feedback_expansion", "p": exp.p, "gamma": exp.gamma,
         "indices": [list(a) for a in exp.indices], "K": exp.K}
    if include_P and exp.P is not None:
        d["P"] = exp.P
    return d


def expansion_from_dict(d):
    P = None if d.get("P") is None else np.array(d["P"], float)
    return FeedbackExpansion(int(d["p"]), float(d["gamma"]),
                             [tuple(a) for a in d["indices"]], np.array(d["K"], float), P)


# snapshots and trajectories

def save_snapshots(path, states, dt, t0=0.0, description="", chash=""):
    """Snapshot CSV (one column per snapshot) plus a ``.json`` sidecar."""
    S = np.atleast_2d(np.asarray(states, float))
    n, N = S.shape
    write_csv(path, [f"s{k}" for k in range(N)], S.tolist(), chash)
    write_json(Path(path).with_suffix(".json"),
               {"n": n, "N": N, "dt": dt, "t0": t0, "description": description})


def load_snapshots(path):
    _, _, rows = read_csv(path)
    meta = read_json(Path(path).with_suffix(".json"))
    S = np.array([[float(c) for c in row] for row in rows], dtype=float).reshape(meta["n"], meta["N"])
    return S, meta


def save_trajectory(path, traj, chash="", include_states=False):
    """Trajectory CSV with times, outputs, inputs and M-norms plus JSON metadata."""
    l = traj.outputs.shape[0]
    m = traj.inputs.shape[0]
    header = ["t"] + [f"y{i}" for i in range(l)] + [f"u{i}" for i in range(m)] + ["mnorm"]
    K = traj.times.shape[0]
    # inputs act on steps, so the final time row has no input
    U = np.full((K, m), np.nan)
    U[:traj.inputs.shape[1]] = traj.inputs.T
    rows = np.column_stack([traj.times, traj.outputs.T, U, traj.mnorms])
    write_csv(path, header, rows.tolist(), chash)
    meta = dict(traj.meta)
    meta.update(blowup=traj.blowup, blowup_time=traj.blowup_time, n_rows=K)
    write_json(Path(path).with_suffix(".json"), meta)
    if include_states:
        dt = float(traj.times[1] - traj.times[0]) if K > 1 else 0.0
        spath = Path(path).with_name(Path(path).stem + "_states.csv")
        save_snapshots(spath, traj.states[:, :K], dt, float(traj.times[0]), "trajectory states", chash)


def load_trajectory(path):
    _, header, rows = read_csv(path)
    meta = read_json(Path(path).with_suffix(".json"))
    A = np.array([[cell_float(c) for c in row] for row in rows], dtype=float)
    A = A.reshape(len(rows), len(header))
    ny = sum(h.startswith("y") for h in header)
    nu = sum(h.startswith("u") for h in header)
    times = A[:, 0]
    outputs = A[:, 1:1 + ny].T
    inputs = A[:-1, 1 + ny:1 + ny + nu].T
    mnorms = A[:, -1]
    blowup = bool(meta.pop("blowup", False))
    blowup_time = meta.pop("blowup_time", None)
    meta.pop("n_rows", None)
    return Trajectory(times, np.empty((0, times.shape[0])), inputs, outputs, mnorms,
                      blowup, blowup_time, meta)


def dump_matrix_csv(path, A, chash=""):
    A = np.atleast_2d(np.asarray(A, float))
    write_csv(path, [f"c{j}" for j in range(A.shape[1])], A.tolist(), chash)
