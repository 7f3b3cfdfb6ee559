"""Experiment driver: data generation, training, sweeps and artifacts.

All artifacts live in one output directory.  Commands read what earlier
commands wrote, so the usual order is ``generate``, ``train``,
``synthesize``, then ``sdre-compare`` or ``fbsweep``.  Results carry no
timestamps, so reruns with the same configuration reproduce every byte.
"""

import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from . import io
from .lpv_expansion import lpv_coefficients_first_order
from .multiindex import count_multiindices
from .sdc_model import make_burgers_benchmark
from .sdre_control import (ExpansionController, compute_expansion_coefficients,
                           exact_sdre_feedback, expanded_feedback)
from .simulation import (BLOWUP_FACTOR, DEFAULT_DT, performance_index, simulate_closed_loop,
                         simulate_open_loop, reconstruction_error_series)

log = logging.getLogger(__name__)

NOTE = "trend-level results on the desk-scale benchmark"


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    seed: int = 0
    # benchmark
    n_grid: int = 64
    viscosity: float = 0.08
    growth: float = None
    growth_margin: float = 1.64
    reaction: float = 3.84
    input_gain: float = 5.0
    boundary: str = "periodic"
    convection: str = "conservative"
    actuators: list = field(default_factory=lambda: [[0.3, 0.45], [0.7, 0.9]])
    sensors: list = field(default_factory=lambda: [[0.5, 0.65], [0.92, 0.99]])
    # data
    dt: float = DEFAULT_DT
    train_t_end: float = 0.5
    validation_t_end: float = 1.0
    # training
    r: int = 5
    q_list: list = field(default_factory=lambda: [1, 3])
    a: float = 10.0
    lam: float = 100.0
    lr: float = 0.005
    epochs: int = 3200
    batch: int = 64
    table_r: list = field(default_factory=lambda: [2, 3, 4, 5, 6, 7, 8])
    gridsearch_r: list = field(default_factory=lambda: [2, 3, 4, 5, 6, 7, 8])
    gridsearch_q: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    gridsearch_epochs: int = None
    # control
    gammas: list = field(default_factory=lambda: [100.0, 10.0, 1.0, 0.1, 0.001])
    t_s_list: list = field(default_factory=lambda: [0.3, 0.5, 0.8, 1.2, 1.6, 2.0])
    p_list: list = field(default_factory=lambda: [0, 1, 2])
    t_e: float = 7.5
    compare_gamma: float = 1.0
    blowup_factor: float = BLOWUP_FACTOR
    marked_cells: list = field(default_factory=list)
    workers: int = 1
    out: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("q_list", "table_r", "gridsearch_r", "gridsearch_q", "gammas",
                     "t_s_list", "p_list"):
            v = getattr(self, name)
            if not isinstance(v, (list, tuple)) or len(v) == 0:
                raise ConfigError(f"{name} must be a nonempty list")
        if self.r < 1 or min(self.q_list) < 1 or min(self.gridsearch_q) < 1:
            raise ConfigError("r and q must be >= 1")
        if min(self.table_r) < 1 or min(self.gridsearch_r) < 1:
            raise ConfigError("r values must be >= 1")
        if any(p not in (0, 1, 2) for p in self.p_list):
            raise ConfigError("p must be in {0, 1, 2}")
        if any(g <= 0 for g in self.gammas) or self.compare_gamma <= 0:
            raise ConfigError("gamma must be positive")
        if self.dt <= 0 or self.t_e <= 0 or self.train_t_end <= 0:
            raise ConfigError("time parameters must be positive")
        if any(ts <= 0 or ts >= self.t_e for ts in self.t_s_list):
            raise ConfigError("every t_s must lie in (0, t_e)")
        if self.epochs < 0 or self.batch < 1 or self.workers < 1:
            raise ConfigError("epochs >= 0, batch >= 1 and workers >= 1 required")
        for name in ("actuators", "sensors"):
            v = getattr(self, name)
            if (not isinstance(v, (list, tuple)) or not v
                    or any(len(iv) != 2 or not 0 <= iv[0] < iv[1] <= 1 for iv in v)):
                raise ConfigError(f"{name} must be a nonempty list of [lo, hi] in [0, 1]")
        if self.n_grid < 4:
            raise ConfigError("n_grid must be at least 4")

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(d)

    def to_dict(self):
        return dataclasses.asdict(self)

    def content_dict(self):
        """Settings that influence results (output path and workers excluded)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("workers")
        return d

    @property
    def hash(self):
        return io.config_hash(self.content_dict())

    @property
    def outdir(self):
        return Path(self.out)


def system_from_config(cfg):
    try:
        return make_burgers_benchmark(cfg.n_grid, cfg.viscosity, cfg.growth,
                                      growth_margin=cfg.growth_margin, reaction=cfg.reaction,
                                      input_gain=cfg.input_gain, boundary=cfg.boundary,
                                      convection=cfg.convection,
                                      actuators=[tuple(a) for a in cfg.actuators],
                                      sensors=[tuple(c) for c in cfg.sensors])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def train_config(cfg, r, q, epochs=None):
    return ae.TrainConfig(r=r, q=q, lam=cfg.lam, lr=cfg.lr,
                          epochs=cfg.epochs if epochs is None else epochs,
                          batch=cfg.batch, seed=cfg.seed, a=cfg.a)


def _csv(cfg, name, header, rows):
    io.write_csv(cfg.outdir / name, header, rows, cfg.hash, NOTE)


def _load_system(cfg):
    return io.load_system(cfg.outdir / "system.json")


def _model_name(q, r):
    return f"model_q{q}_r{r}.json"


# generate

def cmd_generate(cfg):
    """Benchmark system, training snapshots and an open-loop validation run."""
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    sys = system_from_config(cfg)
    tr = simulate_open_loop(sys, t_end=cfg.train_t_end, dt=cfg.dt,
                            blowup_window=cfg.train_t_end, blowup_factor=cfg.blowup_factor)
    if tr.blowup:
        raise NumericalFailure(f"training run blew up at t={tr.blowup_time}")
    val = simulate_open_loop(sys, t_end=cfg.validation_t_end, dt=cfg.dt,
                             blowup_window=cfg.train_t_end, blowup_factor=cfg.blowup_factor)
    io.save_system(cfg.outdir / "system.json", sys)
    io.save_snapshots(cfg.outdir / "snapshots.csv", tr.states, cfg.dt, 0.0,
                      "open-loop test-input run", cfg.hash)
    io.save_trajectory(cfg.outdir / "validation.csv", val, cfg.hash, include_states=True)
    io.write_json(cfg.outdir / "config.json", cfg.to_dict())
    log.info("wrote %d snapshots (n=%d), validation run to t=%g%s", tr.states.shape[1], sys.n,
             val.times[-1], " (blew up)" if val.blowup else "")
    return {"snapshots": tr.states.shape[1], "validation_blowup": val.blowup}


# train

def _fit(args):
    S, M, tc = args
    return ae.train(S, tc, M=M)


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def cmd_train(cfg):
    """Train PAE(q, r) for every q and table r, plus POD(r); write the error table."""
    sys = _load_system(cfg)
    S, _ = io.load_snapshots(cfg.outdir / "snapshots.csv")
    r_values = sorted(set(cfg.table_r) | {cfg.r})
    jobs = [(q, r) for r in r_values for q in cfg.q_list]
    models = _map(_fit, [(S, sys.M, train_config(cfg, r, q)) for q, r in jobs], cfg.workers)
    errs = {}
    for (q, r), model in zip(jobs, models):
        io.save_model(cfg.outdir / _model_name(q, r), model)
        errs[("PAE", q, r)] = reconstruction_error_series(model, S, sys.M)[1]
        if q > 1:
            errs[("PAE1st", q, r)] = reconstruction_error_series(model, S, sys.M, first_order=True)[1]
    for r in r_values:
        pod = ae.pod_basis(S, r, sys.M)
        io.save_model(cfg.outdir / f"pod_r{r}.json", pod)
        errs[("POD", 1, r)] = reconstruction_error_series(pod, S, sys.M)[1]
    labels = [("POD", 1, "POD r")]
    labels += [("PAE", q, f"PAE {q} r") for q in sorted(set(cfg.q_list))]
    labels += [("PAE1st", q, f"PAE {q} r (p=1)") for q in sorted(set(cfg.q_list)) if q > 1]
    rows = [[lab] + [errs.get((kind, q, r), math.nan) for r in r_values] for kind, q, lab in labels]
    _csv(cfg, "reconstruction.csv", ["scheme"] + [f"r={r}" for r in r_values], rows)
    return {"errors": {f"{k[0]} {k[1]} {k[2]}": v for k, v in errs.items()}}


# gridsearch

def _fit_or_none(args):
    try:
        return _fit(args)
    except (ae.TrainingDivergedError, ValueError) as exc:
        return repr(exc)


def cmd_gridsearch(cfg):
    """Average reconstruction error for every (q, r); blank cells mark failures."""
    sys = _load_system(cfg)
    S, _ = io.load_snapshots(cfg.outdir / "snapshots.csv")
    epochs = cfg.epochs if cfg.gridsearch_epochs is None else cfg.gridsearch_epochs
    cells = [(q, r) for q in cfg.gridsearch_q for r in cfg.gridsearch_r]
    out = _map(_fit_or_none, [(S, sys.M, train_config(cfg, r, q, epochs)) for q, r in cells],
               cfg.workers)
    err = {}
    for cell, res in zip(cells, out):
        if isinstance(res, str):
            log.warning("gridsearch cell q=%d r=%d failed: %s", *cell, res)
            err[cell] = math.nan
        else:
            err[cell] = reconstruction_error_series(res, S, sys.M)[1]
    rows = [[q] + [err[(q, r)] for r in cfg.gridsearch_r] for q in cfg.gridsearch_q]
    _csv(cfg, "gridsearch.csv", ["q"] + [f"r={r}" for r in cfg.gridsearch_r], rows)
    finite = {k: v for k, v in err.items() if math.isfinite(v)}
    best = min(finite, key=lambda k: (finite[k], k)) if finite else None
    summary = {"argmin": None if best is None else {"q": best[0], "r": best[1],
                                                    "error": finite[best]},
               "failed": [list(k) for k, v in err.items() if not math.isfinite(v)]}
    io.write_json(cfg.outdir / "gridsearch.json", summary)
    return summary


# synthesize

def cmd_synthesize(cfg):
    """LPV coefficients and feedback expansions for every q and gamma."""
    sys = _load_system(cfg)
    p_max = max(cfg.p_list)
    report = {}
    for q in cfg.q_list:
        model = io.load_model(cfg.outdir / _model_name(q, cfg.r))
        lpv = lpv_coefficients_first_order(sys, model)
        io.write_json(cfg.outdir / f"lpv_q{q}.json", io.lpv_to_dict(lpv))
        exps, failures = [], []
        for g in cfg.gammas:
            try:
                exp = compute_expansion_coefficients(lpv, sys.B, sys.C, g, p_max, sys.M,
                                                     keep_P=False)
            except np.linalg.LinAlgError as exc:
                log.warning("synthesis failed for q=%d gamma=%g: %s", q, g, exc)
                failures.append({"gamma": g, "error": str(exc)})
                continue
            exps.append(io.expansion_to_dict(exp))
        counts = {str(p): count_multiindices(model.r, p) for p in cfg.p_list}
        log.info("q=%d r=%d: equations per gamma by order %s", q, model.r, counts)
        io.write_json(cfg.outdir / f"controllers_q{q}.json",
                      {"q": q, "r": model.r, "p": p_max, "equations": counts,
                       "expansions": exps, "failures": failures})
        report[q] = {"equations": counts, "failures": len(failures)}
    if all(v["failures"] == len(cfg.gammas) for v in report.values()):
        raise NumericalFailure("no feedback expansion could be computed")
    return report


def _load_controllers(cfg, q):
    d = io.read_json(cfg.outdir / f"controllers_q{q}.json")
    model = io.load_model(cfg.outdir / _model_name(q, d["r"]))
    exps = {float(e["gamma"]): io.expansion_from_dict(e) for e in d["expansions"]}
    return model, exps


# sdre-compare

def cmd_sdre_compare(cfg):
    """Feedback differences to the exact SDRE along the validation run."""
    sys = _load_system(cfg)
    X, meta = io.load_snapshots(cfg.outdir / "validation_states.csv")
    times = meta["t0"] + meta["dt"] * np.arange(X.shape[1])
    g = cfg.compare_gamma
    ctrl = {}
    for q in cfg.q_list:
        model, exps = _load_controllers(cfg, q)
        if g not in exps:
            raise ConfigError(f"no expansion synthesized for gamma={g} (q={q})")
        ctrl[q] = (model, exps[g])
    header = ["t", "u_exact"]
    for q in cfg.q_list:
        header += [f"lpv_q{q}"] + [f"p{p}_q{q}" for p in cfg.p_list]
    header += ["failed"]
    rows = []
    for t, v in zip(times, X.T):
        try:
            u = exact_sdre_feedback(sys, None, v, g)
        except np.linalg.LinAlgError:
            rows.append([t] + [math.nan] * (len(header) - 2) + [1])
            continue
        row, failed = [t, float(np.linalg.norm(u))], 0
        for q in cfg.q_list:
            model, exp = ctrl[q]
            try:
                row.append(float(np.linalg.norm(u - exact_sdre_feedback(sys, model, v, g))))
            except np.linalg.LinAlgError:
                row.append(math.nan)
                failed = 1
            rho = ae.encode(model, v)[1]
            for p in cfg.p_list:
                row.append(float(np.linalg.norm(u - expanded_feedback(exp.truncate(p), rho, v))))
        rows.append(row + [failed])
    _csv(cfg, "sdre_compare.csv", header, rows)
    return {"rows": len(rows)}


def window_means(path, t_max):
    """Column means of an sdre-compare table over rows with ``t <= t_max``."""
    _, header, rows = io.read_csv(path)
    A = np.array([[io.cell_float(c) for c in row] for row in rows])
    sel = A[:, 0] <= t_max + 1e-12
    with np.errstate(invalid="ignore"):
        return {h: float(np.nanmean(A[sel, j])) for j, h in enumerate(header)}


# fbsweep

def _run_cell(args):
    sys, model, exp, p, t_s, t_e, dt, factor, keep = args
    ctrl = ExpansionController(model, exp, p)
    traj = simulate_closed_loop(sys, ctrl, t_s, t_e, dt, blowup_factor=factor)
    idx = performance_index(traj, ctrl, t_s, t_e)
    k = int(round(t_s / dt))
    ratio = math.nan if traj.blowup else float(traj.mnorms[-1] / traj.mnorms[k])
    return idx, ratio, (traj if keep else None)


def _marked(cfg):
    return {(int(c[0]), int(c[1]), float(c[2]), float(c[3])) for c in cfg.marked_cells}


def cmd_fbsweep(cfg):
    """Performance index for every (gamma, t_s, p, q); blank cells are blowups."""
    sys = _load_system(cfg)
    marked = _marked(cfg)
    jobs, keys = [], []
    for q in cfg.q_list:
        model, exps = _load_controllers(cfg, q)
        for p in cfg.p_list:
            for g in cfg.gammas:
                if g not in exps:
                    continue
                for ts in cfg.t_s_list:
                    keys.append((q, p, g, ts))
                    jobs.append((sys, model, exps[g], p, ts, cfg.t_e, cfg.dt, cfg.blowup_factor,
                                 (q, p, g, ts) in marked))
    results = dict(zip(keys, _map(_run_cell, jobs, cfg.workers)))
    long_rows = []
    for q in cfg.q_list:
        for p in cfg.p_list:
            rows = []
            for g in cfg.gammas:
                vals = [results.get((q, p, g, ts), (math.inf, math.nan, None))[0]
                        for ts in cfg.t_s_list]
                flags = "".join("1" if not math.isfinite(x) else "0" for x in vals)
                rows.append([g] + vals + [flags])
            _csv(cfg, f"fbsweep_p{p}_q{q}.csv",
                 ["gamma"] + [f"ts={ts}" for ts in cfg.t_s_list] + ["blowup_flags"], rows)
    for (q, p, g, ts), (idx, ratio, traj) in results.items():
        long_rows.append([q, p, g, ts, idx, int(not math.isfinite(idx)), ratio])
        if traj is not None:
            io.save_trajectory(cfg.outdir / f"traj_q{q}_p{p}_g{g:g}_ts{ts:g}.csv", traj, cfg.hash)
    _csv(cfg, "fbsweep.csv", ["q", "p", "gamma", "t_s", "index", "blowup", "terminal_ratio"],
         long_rows)
    return {"cells": len(results),
            "blowups": sum(1 for v in results.values() if not math.isfinite(v[0]))}


def finite_cells(cfg, q, p):
    """Set of (gamma, t_s) with a finite index in a sweep heatmap."""
    _, header, rows = io.read_csv(cfg.outdir / f"fbsweep_p{p}_q{q}.csv")
    out = set()
    for row in rows:
        for ts, cell in zip(cfg.t_s_list, row[1:1 + len(cfg.t_s_list)]):
            if cell != "":
                out.add((float(row[0]), ts))
    return out


# model summary

def cmd_model_summary(cfg, paths=None):
    """Parameter and layer counts for the given (or all saved) model files."""
    if paths is None:
        paths = sorted(cfg.outdir.glob("model_q*_r*.json")) + sorted(cfg.outdir.glob("pod_r*.json"))
    rows = []
    for path in paths:
        c = ae.count_parameters(io.load_model(path))
        rows.append([c["scheme"], c["r"], c["q"], c["encoding_params"], c["encoding_layers"],
                     c["decoding_params"], c["decoding_layers"]])
    rows.sort(key=lambda x: (x[0].split()[0], x[2], x[1]))
    _csv(cfg, "model_summary.csv", ["scheme", "r", "q", "encoding_params", "encoding_layers",
                                    "decoding_params", "decoding_layers"], rows)
    return {"models": len(rows)}


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "gridsearch": cmd_gridsearch,
    "synthesize": cmd_synthesize,
    "sdre-compare": cmd_sdre_compare,
    "fbsweep": cmd_fbsweep,
    "model-summary": cmd_model_summary,
}
