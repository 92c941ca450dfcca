"""Command-line front end.

One command per invocation; configuration is a single JSON document; every
numeric field is validated before any computation starts and the resolved
configuration is echoed into the output directory.  Exit codes: 0 success,
1 usage/config error, 2 mathematically expected negative verdict (divergence,
infeasibility, violated solvability conditions).

`--threads` sizes the worker pool for independent tasks (sweep points run
concurrently and merge in ladder order); the numerical kernels themselves
always run with the BLAS configuration of the host process, so reruns with a
different `--threads` produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import problems, verify
from .constants import check_theorem_conditions, evaluate_point, feasibility_search
from .grid import ScalarField, build_grid
from .reports import csv_text, kv_text, write_atomic, write_json
from .solver import (JetSpec, SolveOptions, solve, solve_holomorphic, solve_real)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEGATIVE = 2

DEFAULTS = {
    "system": None,
    "system_params": {},
    "alpha": 0.5,
    "grid": {"R": 0.5, "n_r": 48, "n_t": 96},
    "jets": {},
    "jet_mode": "vanishing",
    "initial_values": None,
    "solver": {"max_iter": 64, "tol_ratio": 0.75, "tol_residual": 1e-6,
               "gamma": None, "enforce_envelope": True,
               "stop_on_divergence": True, "strategy": "local",
               "skip_feasibility": False, "lane": "auto"},
    "envelope": {"sample_count": 1024, "safety": 1.25, "seed": 20240601},
    "kobayashi": {"chart": "sphere", "dim": 2, "p": [0.0, 0.0], "v": [1.0, 0.0],
                  "R_start": 0.25, "ladder": 6},
    "R_init": None,
    "R": None,
    "gamma": None,
}


def _merge(base, override):
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path) -> dict:
    with open(path) as fh:
        raw = json.load(fh)
    return _merge(DEFAULTS, raw)


def validate_config(cfg, need_system=True) -> list:
    """Every violated precondition, not just the first."""
    errors = []
    a = cfg["alpha"]
    if not (isinstance(a, (int, float)) and 0.0 < a < 1.0):
        errors.append(f"alpha must lie in the open interval (0, 1); got {a!r}")
    g = cfg["grid"]
    if not g["R"] > 0:
        errors.append(f"grid.R must be positive; got {g['R']!r}")
    if g["n_r"] < 4:
        errors.append(f"grid.n_r must be >= 4; got {g['n_r']!r}")
    if g["n_t"] < 8 or g["n_t"] % 2:
        errors.append(f"grid.n_t must be even and >= 8; got {g['n_t']!r}")
    s = cfg["solver"]
    if s["max_iter"] < 1:
        errors.append(f"solver.max_iter must be >= 1; got {s['max_iter']!r}")
    if not (0 < s["tol_ratio"] <= 1):
        errors.append(f"solver.tol_ratio must lie in (0, 1]; got {s['tol_ratio']!r}")
    if s["strategy"] not in ("local", "global"):
        errors.append(f"solver.strategy must be 'local' or 'global'; got {s['strategy']!r}")
    if cfg["envelope"]["sample_count"] < 16:
        errors.append("envelope.sample_count must be >= 16")
    if cfg["envelope"]["safety"] < 1.0:
        errors.append("envelope.safety must be >= 1.0")
    if need_system and not cfg["system"]:
        errors.append("system must name a builtin "
                      f"{problems.BUILTIN_NAMES} or a 'module:function' plugin")
    for key, v in cfg.get("jets", {}).items():
        try:
            i, j = (int(t) for t in key.split(","))
            if i < 0 or j < 0:
                raise ValueError
        except ValueError:
            errors.append(f"jets key {key!r} must look like 'i,j' with i, j >= 0")
    return errors


def build_system(cfg):
    name = cfg["system"]
    params = dict(cfg.get("system_params", {}))
    if ":" in name:
        import importlib

        mod, fn = name.split(":", 1)
        return getattr(importlib.import_module(mod), fn)(**params)
    for key in ("F", "a_fn", "A_fn"):
        if key in params and isinstance(params[key], str):
            expr = params[key]
            if key == "F":
                params[key] = lambda z, expr=expr: eval(
                    expr, {"np": np, "z": z})  # documented config hook
            else:
                raise ValueError(f"{key} must be supplied programmatically")
    if name == "m_laplace" and "A_fn" not in params:
        params["A_fn"] = lambda x, y, xis: np.zeros((params.get("n", 1),) + np.shape(x))
    return problems.builtin(name, **params)


def parse_jets(cfg, n) -> JetSpec:
    entries = {}
    for key, val in cfg.get("jets", {}).items():
        i, j = (int(t) for t in key.split(","))
        arr = np.asarray(val, dtype=float)
        if arr.ndim == 1 and arr.shape[0] == 2 and n == 1:
            entries[(i, j)] = np.array([arr[0] + 1j * arr[1]])
        else:
            arr = arr.reshape(n, 2)
            entries[(i, j)] = arr[:, 0] + 1j * arr[:, 1]
    return JetSpec(entries, mode=cfg.get("jet_mode", "vanishing"))


def _write_solution(outdir, u, report):
    write_atomic(os.path.join(outdir, "report.txt"), report.to_text())
    write_atomic(os.path.join(outdir, "convergence.csv"), report.convergence_csv())
    for (i, j), (vi, vb) in sorted(u.entries.items()):
        for c in range(u.n):
            suffix = f"_c{c}" if u.n > 1 else ""
            ScalarField(u.grid, vi[c], vb[c]).to_csv(
                os.path.join(outdir, f"u_{i}_{j}{suffix}.csv"))


def cmd_solve(cfg, outdir) -> int:
    system = build_system(cfg)
    spec = parse_jets(cfg, system.n)
    gcfg = cfg["grid"]
    scfg = cfg["solver"]
    grid = build_grid(gcfg["R"], gcfg["n_r"], gcfg["n_t"])
    conditions = check_theorem_conditions(system)
    gamma = scfg.get("gamma") if scfg.get("gamma") is not None else cfg.get("gamma")
    constants = None
    feas_failed = None
    if gamma is None and not scfg["skip_feasibility"]:
        fs = feasibility_search(system, cfg["alpha"], strategy=scfg["strategy"],
                                R_init=gcfg["R"],
                                sample_count=cfg["envelope"]["sample_count"],
                                safety=cfg["envelope"]["safety"])
        if fs.feasible:
            gamma = fs.gamma0
            constants = fs.report.as_dict()
            if fs.R0 < gcfg["R"]:
                grid = build_grid(fs.R0, gcfg["n_r"], gcfg["n_t"])
        else:
            feas_failed = fs.binding
            constants = fs.report.as_dict() if fs.report else None
    opts = SolveOptions(alpha=cfg["alpha"], max_iter=scfg["max_iter"],
                        tol_ratio=scfg["tol_ratio"],
                        tol_residual=scfg["tol_residual"], gamma=gamma,
                        enforce_envelope=scfg["enforce_envelope"],
                        stop_on_divergence=scfg["stop_on_divergence"])
    lane = scfg.get("lane", "auto")
    if lane == "auto":
        lane = "holomorphic" if system.holomorphic else (
            "real" if system.real_valued else "complex")
    if lane == "holomorphic":
        a_vals = np.asarray(cfg["initial_values"], dtype=complex)
        u, report = solve_holomorphic(system, a_vals, grid, opts)
    elif lane == "real":
        u, report = solve_real(system, spec, grid, opts)
    else:
        u, report = solve(system, spec, grid, opts)
    report.constants = constants
    if feas_failed:
        report.notes.append(f"feasibility search failed: {feas_failed}")
    if not conditions.cond1_vanishing and not system.eta_m_free:
        report.notes.append(
            "solvability condition (vanishing top-derivative coupling) violated: "
            f"|d_eta a(0)| = {conditions.d_eta_m!r}, "
            f"|dbar_eta a(0)| = {conditions.dbar_eta_m!r}")
    write_json(os.path.join(outdir, "conditions.json"),
               _jsonable(conditions.as_dict()))
    _write_solution(outdir, u, report)
    negative = (not report.converged) or feas_failed is not None or \
        (not conditions.cond1_vanishing and not system.eta_m_free)
    return EXIT_NEGATIVE if negative else EXIT_OK


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            out[k] = float(v)
        elif isinstance(v, (bool, int, float, str)) or v is None:
            out[k] = v
        else:
            out[k] = repr(v)
    return out


def cmd_constants(cfg, outdir) -> int:
    system = build_system(cfg)
    conditions = check_theorem_conditions(system)
    R = cfg.get("R") or cfg["grid"]["R"]
    gamma = cfg.get("gamma")
    if gamma is not None:
        rep = evaluate_point(system, cfg["alpha"], R, gamma,
                             sample_count=cfg["envelope"]["sample_count"],
                             safety=cfg["envelope"]["safety"])
        rep.conditions = conditions.as_dict()
        write_atomic(os.path.join(outdir, "constants.txt"), rep.to_text())
        return EXIT_OK if rep.feasible else EXIT_NEGATIVE
    fs = feasibility_search(system, cfg["alpha"], strategy=cfg["solver"]["strategy"],
                            R_init=R, sample_count=cfg["envelope"]["sample_count"],
                            safety=cfg["envelope"]["safety"])
    rep = fs.report
    if rep is not None:
        rep.conditions = conditions.as_dict()
        write_atomic(os.path.join(outdir, "constants.txt"), rep.to_text())
    rows = [(r, g, d, e, f) for (r, g, d, e, f) in fs.rows]
    write_atomic(os.path.join(outdir, "sweep.csv"),
                 csv_text(["R", "gamma", "delta", "eta", "feasible"], rows))
    return EXIT_OK if fs.feasible else EXIT_NEGATIVE


def cmd_region(cfg, outdir, threads=0) -> int:
    system = build_system(cfg)
    fs = feasibility_search(system, cfg["alpha"], strategy=cfg["solver"]["strategy"],
                            R_init=cfg.get("R") or cfg["grid"]["R"],
                            sample_count=cfg["envelope"]["sample_count"],
                            safety=cfg["envelope"]["safety"])
    write_atomic(os.path.join(outdir, "region.csv"),
                 csv_text(["R", "gamma", "delta", "eta", "feasible"], fs.rows))
    summary = {"feasible": fs.feasible, "R0": fs.R0, "gamma0": fs.gamma0,
               "binding": fs.binding}
    write_atomic(os.path.join(outdir, "region.txt"), kv_text(summary))
    return EXIT_OK if fs.feasible else EXIT_NEGATIVE


def cmd_verify(cfg, outdir) -> int:
    results = verify.run_all()
    text = "\n".join(r.line() for r in results) + "\n"
    write_atomic(os.path.join(outdir, "verify.log"), text)
    sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in results) else EXIT_ERROR


def cmd_kobayashi(cfg, outdir) -> int:
    k = cfg["kobayashi"]
    dim = int(k["dim"])
    chart_name = k["chart"]
    if chart_name == "flat":
        chart = problems.flat_chart(dim)
    elif chart_name == "sphere":
        chart = problems.sphere_chart(dim)
    else:
        chart = problems.chart_from_csv(chart_name, dim)
    res = problems.kobayashi_upper_bound(
        chart, k["p"], k["v"], R_start=k["R_start"], ladder=int(k["ladder"]),
        alpha=cfg["alpha"], sample_count=cfg["envelope"]["sample_count"])
    rows = [(R, status, detail) for (R, status, detail) in res.rows]
    write_atomic(os.path.join(outdir, "kobayashi.csv"),
                 csv_text(["R", "status", "detail"], rows))
    summary = {"R_best": res.R_best, "upper_bound": res.bound,
               "note": "upper bound on the harmonic Kobayashi metric; "
                       "the infimum itself is not computable from finitely many solves"}
    write_atomic(os.path.join(outdir, "kobayashi.txt"), kv_text(summary))
    return EXIT_OK if res.R_best is not None else EXIT_NEGATIVE


DEMOS = {
    "biharmonic": {"system": "m_laplace", "system_params": {"m_prime": 2},
                   "grid": {"R": 0.5, "n_r": 24, "n_t": 48},
                   "jets": {"1,0": [1.0, 0.0]}, "jet_mode": "polynomial",
                   "solver": {"skip_feasibility": True, "gamma": 10.0}},
    "mizohata": {"system": "mizohata", "grid": {"R": 0.5, "n_r": 24, "n_t": 48},
                 "jets": {"1,0": [1.0, 0.0]},
                 "solver": {"skip_feasibility": True, "gamma": 1e30,
                            "max_iter": 20}},
    "liouville": {"system": "liouville", "solver": {"strategy": "local"},
                  "grid": {"R": 1.0, "n_r": 32, "n_t": 64}},
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pompeiu",
        description="Cauchy-Green disk operators and Picard solvers for "
                    "d^mu dbar^nu u = a(z, u, ..., D^m u)")
    parser.add_argument("command",
                        choices=["solve", "constants", "region", "verify",
                                 "kobayashi", "demo"])
    parser.add_argument("name", nargs="?", help="demo name (for `demo`)")
    parser.add_argument("--config", help="path to a JSON run configuration")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=0,
                        help="worker pool size for independent tasks (0 = auto); "
                             "does not affect numerical kernels")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config) if args.config else dict(DEFAULTS)
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_ERROR

    if args.command == "demo":
        if args.name not in DEMOS:
            sys.stderr.write(f"unknown demo {args.name!r}; know {sorted(DEMOS)}\n")
            return EXIT_ERROR
        cfg = _merge(DEFAULTS, DEMOS[args.name])
        command = "solve"
    else:
        command = args.command

    errors = validate_config(cfg, need_system=command in
                             ("solve", "constants", "region"))
    if errors:
        for e in errors:
            sys.stderr.write(f"config error: {e}\n")
        return EXIT_ERROR

    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    write_json(os.path.join(outdir, "resolved_config.json"), cfg)

    try:
        if command == "solve":
            code = cmd_solve(cfg, outdir)
        elif command == "constants":
            code = cmd_constants(cfg, outdir)
        elif command == "region":
            code = cmd_region(cfg, outdir, threads=args.threads)
        elif command == "verify":
            code = cmd_verify(cfg, outdir)
        elif command == "kobayashi":
            code = cmd_kobayashi(cfg, outdir)
        else:  # pragma: no cover
            code = EXIT_ERROR
    except Exception as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR
    return code


if __name__ == "__main__":
    sys.exit(main())
