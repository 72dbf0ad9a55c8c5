"""Command-line entry point: ``python -m coexact <command> [options]``.

Every command writes a JSON report (``--out``), CSV tables next to it when
it has any, and a ``.meta.json`` file with timing information. Reports hold
no timestamps, so identical configurations give identical bytes.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__

COMMANDS = ("spectrum", "homology", "filling", "cheeger", "montecarlo", "berger", "cusp", "verify-all")
STOCHASTIC = ("spectrum", "cheeger", "montecarlo")

DEFAULTS = {
    "mesh": None,
    "model": "torus",
    "epsilon": None,
    "n": None,
    "T": 8.0,
    "seed": None,
    "tol": 1e-8,
    "out": None,
    "threads": None,
    "count": 5,
    "n_traj": 256,
    "cycle": None,
    "r": None,
    "backend": "auto",
    "tree_cycles": 64,
    "short_cycles": 64,
    "criteria": None,
}


class ConfigError(ValueError):
    pass


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def _parser():
    p = _Parser(prog="coexact", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML file; command-line flags override its values")
    p.add_argument("--mesh", help="mesh file (.json or .off) with 3- or 4-dimensional vertex coordinates")
    p.add_argument("--model", choices=("torus", "berger", "cusp"))
    p.add_argument("--epsilon", type=float)
    p.add_argument("--n", type=int, help="resolution: torus grid size, Berger cube subdivision, "
                                         "cusp sphere level (mesh) or finite-difference nodes (cusp command)")
    p.add_argument("--T", type=float, help="trajectory time")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--out", help="path of the JSON report")
    p.add_argument("--threads", type=int, help="BLAS threads, applied at startup by the coexact entry points; never changes results")
    p.add_argument("--count", type=int, help="number of eigenpairs")
    p.add_argument("--n-traj", dest="n_traj", type=int, help="number of trajectories")
    p.add_argument("--cycle", help="closed vertex loop, comma separated")
    p.add_argument("--r", help="filling multiplicity: an integer or 'universal'")
    p.add_argument("--backend", choices=("auto", "simplex", "highs"))
    p.add_argument("--tree-cycles", dest="tree_cycles", type=int)
    p.add_argument("--short-cycles", dest="short_cycles", type=int)
    p.add_argument("--criteria", help="verify-all: comma separated criterion numbers")
    p.add_argument("--quiet", action="store_true", help="do not print the report")
    return p


def _load_toml(path):
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    return doc


def resolve_config(argv):
    """Merge defaults, the optional TOML file and command-line flags."""
    try:
        args = _parser().parse_args(argv)
    except _ArgumentError as exc:
        raise ConfigError(str(exc)) from None
    cfg = dict(DEFAULTS)
    if args.config:
        doc = _load_toml(args.config)
        section = dict(doc.get(args.command, {})) if isinstance(doc.get(args.command), dict) else {}
        flat = {k: v for k, v in doc.items() if not isinstance(v, dict)}
        for key, value in {**flat, **section}.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            cfg[key] = value
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg["command"] = args.command
    cfg["quiet"] = bool(args.quiet)
    _validate(cfg)
    return cfg


def _validate(cfg):
    cmd = cfg["command"]

    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    def number(key, lo=None, hi=None, integer=False, lo_open=False):
        v = cfg[key]
        if v is None:
            return
        need(isinstance(v, (int, float)) and not isinstance(v, bool), f"{key} must be a number")
        if integer:
            need(float(v).is_integer(), f"{key} must be an integer")
            cfg[key] = int(v)
        else:
            cfg[key] = float(v)
        v = cfg[key]
        need(math.isfinite(v), f"{key} must be finite")
        if lo is not None:
            need(v > lo if lo_open else v >= lo, f"{key} must be {'>' if lo_open else '>='} {lo}, got {v}")
        if hi is not None:
            need(v <= hi, f"{key} must be <= {hi}, got {v}")

    number("epsilon", 0.0, 1.0, lo_open=True)
    number("n", 1, integer=True)
    number("T", 0.0, lo_open=True)
    number("seed", 0, integer=True)
    number("tol", 0.0, 1.0, lo_open=True)
    number("threads", 1, integer=True)
    number("count", 1, 1000, integer=True)
    number("n_traj", 1, 10 ** 7, integer=True)
    number("tree_cycles", 0, integer=True)
    number("short_cycles", 0, integer=True)
    need(cfg["model"] in ("torus", "berger", "cusp"), f"unknown model {cfg['model']!r}")
    need(cfg["backend"] in ("auto", "simplex", "highs"), f"unknown backend {cfg['backend']!r}")
    if cmd in STOCHASTIC:
        need(cfg["seed"] is not None, f"command {cmd!r} needs --seed")
    if cmd == "cusp" or cfg["model"] == "cusp":
        need(cfg["epsilon"] is None or cfg["epsilon"] < 1.0, "the cusp model needs epsilon < 1")
    if cmd == "cusp":
        need(cfg["n"] is None or cfg["n"] >= 16, "cusp needs --n >= 16 finite-difference nodes")
    if cfg["model"] == "torus" and cfg["n"] is not None and cmd not in ("berger", "cusp"):
        need(cfg["n"] >= 3, "the torus grid needs --n >= 3")
    if cfg["model"] == "berger" and cfg["n"] is not None and cmd != "cusp":
        need(cfg["n"] >= 2 and cfg["n"] % 2 == 0, "the Berger resolution --n must be even and >= 2")
    if cfg["r"] is not None and cfg["r"] != "universal":
        try:
            cfg["r"] = int(cfg["r"])
        except (TypeError, ValueError):
            raise ConfigError("--r must be an integer or 'universal'") from None
        need(cfg["r"] >= 1, "--r must be positive")
    if cfg["cycle"] is not None:
        if isinstance(cfg["cycle"], str):
            try:
                cfg["cycle"] = [int(v) for v in cfg["cycle"].split(",") if v.strip()]
            except ValueError:
                raise ConfigError("--cycle must be comma separated vertex ids") from None
        need(len(cfg["cycle"]) >= 2 and cfg["cycle"][0] == cfg["cycle"][-1], "--cycle must be a closed vertex loop")
    if cfg["criteria"] is not None:
        items = cfg["criteria"]
        if isinstance(items, str):
            items = items.split(",")
        try:
            cfg["criteria"] = sorted({int(v) for v in items})
        except (TypeError, ValueError):
            raise ConfigError("--criteria must list integers") from None
        need(all(1 <= v <= 11 for v in cfg["criteria"]), "criteria are numbered 1 to 11")
    if cfg["mesh"] is not None:
        need(Path(cfg["mesh"]).is_file(), f"mesh file {cfg['mesh']} not found")


# -- geometry --------------------------------------------------------------

def _metric(cfg):
    """MetricData for the configured mesh file or model."""
    from .complex import load_mesh
    from .dec import assemble_metric
    from .models import generate_mesh

    if cfg["mesh"]:
        mesh = load_mesh(cfg["mesh"])
        if mesh.vertices is None:
            raise ConfigError("mesh file has no vertex coordinates")
        return assemble_metric(mesh.complex, mesh.vertices, name=Path(cfg["mesh"]).stem)
    model = cfg["model"]
    res = cfg["n"]
    if model == "torus" and res is None:
        res = 8
    _, md = generate_mesh(model, res, epsilon=cfg["epsilon"])
    return md


def _default_cycle(cfg, md):
    if cfg["cycle"] is not None:
        return cfg["cycle"]
    if not cfg["mesh"] and cfg["model"] == "berger":
        from .models.berger import fiber_loop

        return fiber_loop(md)
    if not cfg["mesh"] and cfg["model"] == "cusp":
        from .models.cusp import equator_loop

        return equator_loop(md)
    # boundary of the first triangle
    a, b, c = (int(v) for v in md.complex.simplices[2][0])
    return [a, b, c, a]


# -- commands --------------------------------------------------------------

def cmd_spectrum(cfg):
    from .homology import homology_basis
    from .models.torus import first_eigenvalue
    from .spectra import coexact_spectrum, sup_l2_ratio

    md = _metric(cfg)
    H = homology_basis(md.complex)
    res = coexact_spectrum(md, cfg["count"], tol=cfg["tol"], seed=cfg["seed"], homology=H)
    out = {"mesh": md.name, "counts": list(md.complex.counts), **res.to_dict()}
    if len(res.eigenvalues):
        out["sup_l2_ratio"] = sup_l2_ratio(md, res.eigenforms[:, 0])
    if not cfg["mesh"] and cfg["model"] == "torus":
        out["reference"] = first_eigenvalue()
    elif not cfg["mesh"] and cfg["model"] == "berger":
        eps = md.extra["epsilon"]
        out["reference"] = 4 * eps * eps
    table = [["index", "eigenvalue", "residual"]]
    table += [[i, repr(float(v)), repr(float(r))] for i, (v, r) in enumerate(zip(res.eigenvalues, res.residuals))]
    return out, {"eigenvalues": table}


def cmd_homology(cfg):
    from .homology import homology_basis

    md = _metric(cfg)
    H = homology_basis(md.complex)
    out = {"mesh": md.name, "counts": list(md.complex.counts), **H.to_json()}
    table = [["cycle", "edges", "length"]]
    table += [[j, len(c), repr(float(c.l1(md.edge_lengths)))] for j, c in enumerate(H.cycles)]
    return out, {"cycles": table}


def cmd_filling(cfg):
    from .complex import Chain
    from .homology import homology_basis
    from .filling import min_filling_area

    md = _metric(cfg)
    H = homology_basis(md.complex)
    loop = _default_cycle(cfg, md)
    try:
        gamma = Chain.edge_path(md.complex, loop)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"cycle is not an edge path of the mesh: {exc}") from None
    res = min_filling_area(md, H, gamma, r=cfg["r"], backend=cfg["backend"])
    out = {"mesh": md.name, "cycle": [int(v) for v in loop], "length": gamma.l1(md.edge_lengths),
           "area": res.area, "r": res.r_used, "lp_status": res.lp_status, "backend": res.backend,
           "integrality_gap": res.integrality_gap, "residual": res.residual}
    table = [["triangle", "coefficient"]]
    table += [[int(i), repr(float(res.chain[i]))] for i in np.flatnonzero(np.abs(res.chain) > 1e-12)]
    return out, {"chain": table}


def cmd_cheeger(cfg):
    from .complex import Chain
    from .filling import SamplerConfig, cheeger_estimate
    from .homology import homology_basis

    md = _metric(cfg)
    H = homology_basis(md.complex)
    extra = []
    if (not cfg["mesh"] and cfg["model"] in ("berger", "cusp")) or cfg["cycle"] is not None:
        extra.append(Chain.edge_path(md.complex, _default_cycle(cfg, md)))
    sc = SamplerConfig(seed=cfg["seed"], tree_cycles=cfg["tree_cycles"], short_cycles=cfg["short_cycles"],
                       extra_cycles=extra, backend=cfg["backend"], r=cfg["r"])
    est = cheeger_estimate(md, H, sc)
    out = {"mesh": md.name, **est.to_dict()}
    if not cfg["mesh"] and cfg["model"] == "berger":
        from .models.berger import berger_h1_bounds

        upper, _ = berger_h1_bounds(md.extra["epsilon"])
        out["upper_bound"] = upper
        out["ratio_over_epsilon"] = est.ratio / md.extra["epsilon"]
    rows = est.to_csv().strip("\n").split("\n")
    return out, {"cycles": [r.split(",") for r in rows]}


def cmd_montecarlo(cfg):
    from .homology import homology_basis
    from .flow import prepare_problem, run_monte_carlo
    from .spectra import coexact_spectrum

    md = _metric(cfg)
    H = homology_basis(md.complex)
    spec = coexact_spectrum(md, 1, tol=cfg["tol"], seed=cfg["seed"], homology=H)
    problem = prepare_problem(md, H, spec.eigenforms[:, 0])
    report, traj, un = run_monte_carlo(problem, cfg["n_traj"], cfg["T"], cfg["seed"])
    out = {"mesh": md.name, "eigenvalue": problem.eigenvalue, "alpha_sup": problem.alpha_sup,
           **report.to_dict()}
    table = [["traj", "start_tet", "end_tet", "length", "beta_integral", "steps"]]
    for i in range(len(traj)):
        table.append([i, int(traj.start_tet[i]), int(traj.end_tet[i]), repr(float(traj.length[i])),
                      repr(float(traj.time_integrals[i])), int(traj.steps[i])])
    return out, {"trajectories": table}


def cmd_berger(cfg):
    from .models.berger import (BergerModel, berger_h1_bounds, berger_spectrum_invariant, hopf_identities,
                                invariant_laplacian)

    eps = 1.0 if cfg["epsilon"] is None else cfg["epsilon"]
    model = BergerModel(eps)
    spec = berger_spectrum_invariant(model)
    upper, lower = berger_h1_bounds(model)
    out = {"epsilon": eps, "invariant_eigenvalues": [float(v) for v in spec],
           "invariant_eigenvalue": float(spec[0]), "predicted": 4 * eps * eps,
           "adjoint_route_max_difference": float(np.abs(invariant_laplacian(model, route="adjoint")
                                                        - invariant_laplacian(model)).max()),
           "structure_constants": model.structure_constants.tolist(),
           "h1_upper": upper, "filling_lower": lower, "hopf": hopf_identities(model)}
    tables = {}
    if cfg["n"] is not None:
        from .complex import Chain
        from .filling import min_filling_area
        from .homology import homology_basis
        from .models.berger import berger_mesh, fiber_loop
        from .spectra import coexact_spectrum

        md = berger_mesh(eps, cfg["n"])
        H = homology_basis(md.complex)
        res = coexact_spectrum(md, cfg["count"], tol=cfg["tol"], seed=cfg["seed"] or 0, homology=H)
        loop = Chain.edge_path(md.complex, fiber_loop(md))
        fill = min_filling_area(md, H, loop, backend=cfg["backend"])
        length = loop.l1(md.edge_lengths)
        out["mesh"] = {"resolution": cfg["n"], "counts": list(md.complex.counts),
                       "betti": list(H.betti), "eigenvalues": [float(v) for v in res.eigenvalues],
                       "fiber_length": length, "fiber_length_exact": 2 * math.pi * eps,
                       "fiber_filling_area": fill.area, "fiber_ratio": length / fill.area}
        tables["eigenvalues"] = [["index", "eigenvalue"]] + [[i, repr(float(v))] for i, v in enumerate(res.eigenvalues)]
    return out, tables


def cmd_cusp(cfg):
    from .models.cusp import CuspModel, cusp_eigenvalue

    eps = 0.1 if cfg["epsilon"] is None else cfg["epsilon"]
    N = 2048 if cfg["n"] is None else cfg["n"]
    res = cusp_eigenvalue(CuspModel(eps, N))
    out = {"epsilon": eps, "grid_size": N, "interval": [math.log(eps), -math.log(eps)],
           "finite_difference": res.finite_difference, "analytic": res.analytic,
           "relative_error": res.relative_error, "rayleigh_quotient": res.rayleigh_quotient()}
    table = [["t", "f"]] + [[repr(float(t)), repr(float(f))] for t, f in zip(res.grid, res.eigenfunction)]
    return out, {"eigenfunction": table}


def cmd_verify_all(cfg):
    from .acceptance import run_criterion

    results = []
    for k in cfg["criteria"] or range(1, 12):
        r = run_criterion(k)
        results.append(r)
        if not cfg["quiet"]:
            print(r.line(), flush=True)
    out = {"passed": all(r.passed for r in results), "criteria": [r.to_dict() for r in results]}
    table = [["criterion", "title", "passed", "summary"]]
    table += [[r.number, r.title, "PASS" if r.passed else "FAIL", r.summary] for r in results]
    return out, {"criteria": table}


HANDLERS = {
    "spectrum": cmd_spectrum, "homology": cmd_homology, "filling": cmd_filling, "cheeger": cmd_cheeger,
    "montecarlo": cmd_montecarlo, "berger": cmd_berger, "cusp": cmd_cusp, "verify-all": cmd_verify_all,
}


# -- output ----------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _dump(obj):
    return json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n"


def _write_csv(path, rows):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerows(rows)


def _report_config(cfg):
    return {k: v for k, v in sorted(cfg.items()) if k not in ("out", "quiet", "threads", "config")}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    t0 = time.perf_counter()
    try:
        cfg = resolve_config(argv)
    except ConfigError as exc:
        sys.stderr.write(_dump({"error": "config", "message": str(exc)}))
        return 2
    from .complex import ComplexError
    from .dec import GeometryError

    try:
        result, tables = HANDLERS[cfg["command"]](cfg)
        code = 0
        if cfg["command"] == "verify-all" and not result["passed"]:
            code = 3
    except ConfigError as exc:
        sys.stderr.write(_dump({"error": "config", "message": str(exc)}))
        return 2
    except (ComplexError, GeometryError) as exc:
        sys.stderr.write(_dump({"error": "input", "module": type(exc).__module__, "type": type(exc).__name__,
                                "message": str(exc)}))
        return 2
    except (ArithmeticError, np.linalg.LinAlgError, ValueError, RuntimeError) as exc:
        sys.stderr.write(_dump({"error": "numerical", "module": type(exc).__module__, "type": type(exc).__name__,
                                "message": str(exc)}))
        return 3
    report = {"artifact": {"name": "coexact", "version": __version__}, "command": cfg["command"],
              "config": _report_config(cfg), "result": result}
    text = _dump(report)
    if cfg["out"]:
        out = Path(cfg["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        stem = out.with_suffix("")
        for name, rows in tables.items():
            _write_csv(f"{stem}.{name}.csv", rows)
        meta = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "elapsed_seconds": time.perf_counter() - t0,
                "python": platform.python_version(), "numpy": np.__version__, "threads": cfg["threads"],
                "argv": argv, "pid": os.getpid()}
        Path(f"{stem}.meta.json").write_text(_dump(meta))
    if not cfg["quiet"] and cfg["command"] != "verify-all":
        sys.stdout.write(text)
    return code
