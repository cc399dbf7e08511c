"""Command line entry point: ``netsemi <command> --config model.json``.

Exit codes: 0 success, 2 configuration error, 3 near spectrum or no
contraction, 4 witness requested for a positive model.  Failures print a
JSON diagnostic on standard error.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import diffres, evolve, posit, spectral, transres
from .errors import (NearSpectrum, NetsemiError, NoContraction, NotViolating,
                     SeriesDiverges, SinkPresent, ValidationError)
from .gridfn import Grid, NetworkState, format_float, state_to_csv
from .netmodel import (DiffusionCoupling, FickRates, FlowNetwork, NetworkGraph,
                       TransportCoupling, build_diffusion_coupling,
                       build_transport_coupling, check_conservation_condition,
                       detect_sinks, kappa_column_sums)

EXIT_OK, EXIT_CONFIG, EXIT_SPECTRUM, EXIT_NOT_VIOLATING = 0, 2, 3, 4


class ConfigError(ValidationError):
    pass


@dataclass
class Model:
    kind: str
    coupling: object
    grid: Grid
    initial: NetworkState
    run: dict
    graph: NetworkGraph = None


# ---------------------------------------------------------------------------
# config

def _get(d, key, path, typ=None, required=True, default=None):
    if key not in d:
        if required:
            raise ConfigError(f"missing key '{key}'", f"{path}.{key}" if path else key)
        return default
    v = d[key]
    if typ is not None and not isinstance(v, typ):
        raise ConfigError(f"'{key}' has the wrong type", f"{path}.{key}" if path else key)
    return v


def _matrix(v, m, path):
    try:
        a = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("not a numeric matrix", path) from None
    if a.shape != (m, m):
        raise ConfigError(f"expected a {m}x{m} matrix", path)
    return a


def _vector(v, m, path):
    try:
        a = np.atleast_1d(np.array(v, dtype=float))
    except (TypeError, ValueError):
        raise ConfigError("not a numeric vector", path) from None
    if a.size == 1 and m > 1:
        a = np.full(m, a[0])
    if a.shape != (m,):
        raise ConfigError(f"expected {m} entries", path)
    return a


def _graph(cfg):
    g = _get(cfg, "graph", "", dict)
    n = _get(g, "vertices", "graph", int)
    edges = _get(g, "edges", "graph", list)
    try:
        return NetworkGraph.from_edges(n, [tuple(e) for e in edges])
    except (TypeError, IndexError):
        raise ConfigError("edges must be [tail, head] pairs", "graph.edges") from None


def _cross(items, path):
    out = {}
    for k, item in enumerate(items):
        if not (isinstance(item, list) and len(item) == 3):
            raise ConfigError("cross rates are [i, j, rate] triples", f"{path}[{k}]")
        out[(int(item[0]), int(item[1]))] = float(item[2])
    return out


def _diffusion_coupling(cfg, m_hint):
    if "matrices" in cfg:
        mats = _get(cfg, "matrices", "", dict)
        k00 = np.atleast_2d(np.array(_get(mats, "k00", "matrices"), dtype=float))
        m = k00.shape[0]
        blocks = [_matrix(_get(mats, k, "matrices"), m, f"matrices.{k}")
                  for k in ("k00", "k01", "k10", "k11")]
        sigma = _vector(_get(cfg, "sigma", "", required=False, default=1.0), m, "sigma")
        return DiffusionCoupling(*blocks, sigma), None
    g = _graph(cfg)
    rates = _get(cfg["graph"], "rates", "graph", dict)
    fr = FickRates(_vector(_get(rates, "l", "graph.rates"), g.m, "graph.rates.l"),
                   _vector(_get(rates, "r", "graph.rates"), g.m, "graph.rates.r"),
                   _cross(rates.get("l_cross", []), "graph.rates.l_cross"),
                   _cross(rates.get("r_cross", []), "graph.rates.r_cross"))
    sigma = _vector(_get(cfg, "sigma", "", required=False, default=1.0), g.m, "sigma")
    return build_diffusion_coupling(g, fr, sigma), g


def _transport_coupling(cfg):
    if "matrices" in cfg:
        mats = _get(cfg, "matrices", "", dict)
        k = np.atleast_2d(np.array(_get(mats, "k", "matrices"), dtype=float))
        m = k.shape[0]
        k = _matrix(k, m, "matrices.k")
        c = _vector(_get(cfg, "speeds", ""), m, "speeds")
        return TransportCoupling(k, c), None
    g = _graph(cfg)
    gc = cfg["graph"]
    sinks = detect_sinks(g)
    if sinks:
        raise SinkPresent(sinks)
    w = np.array(_get(gc, "w", "graph"), dtype=float)
    fn = FlowNetwork(g, w,
                     _vector(gc.get("xi", 1.0), g.m, "graph.xi"),
                     _vector(gc.get("gamma", 1.0), g.m, "graph.gamma"),
                     _vector(_get(cfg, "speeds", ""), g.m, "speeds"))
    return build_transport_coupling(fn), g


def _initial(cfg, grid, m):
    init = _get(cfg, "initial", "", dict, required=False, default={"constant": 1.0})
    x = grid.nodes
    if "values" in init:
        v = np.array(init["values"], dtype=float)
        if v.shape != (m, x.size):
            raise ConfigError(f"initial values must be {m} rows of {x.size} nodal values",
                              "initial.values")
        return NetworkState(grid, v)
    if "table" in init:
        rows = init["table"]
        if not isinstance(rows, list) or len(rows) != m:
            raise ConfigError(f"initial table needs {m} edges", "initial.table")
        vals = []
        for j, tab in enumerate(rows):
            t = np.array(tab, dtype=float)
            if t.ndim != 2 or t.shape[1] != 2 or t.shape[0] < 2:
                raise ConfigError("table rows are [x, value] pairs", f"initial.table[{j}]")
            vals.append(np.interp(x, t[:, 0], t[:, 1]))
        return NetworkState(grid, np.array(vals))
    if "constant" in init:
        return NetworkState.constant(grid, m, float(init["constant"]))
    raise ConfigError("initial needs 'values', 'table' or 'constant'", "initial")


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", "config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} at line {exc.lineno}", "config") from None
    return parse_config(cfg)


def parse_config(cfg):
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", "")
    kind = _get(cfg, "model", "", str)
    if kind not in ("diffusion", "transport"):
        raise ConfigError("model must be 'diffusion' or 'transport'", "model")
    if "graph" in cfg and "matrices" in cfg:
        raise ConfigError("give either graph or matrices, not both", "matrices")
    if "graph" not in cfg and "matrices" not in cfg:
        raise ConfigError("missing key 'matrices' (or 'graph')", "matrices")
    if kind == "diffusion":
        coupling, g = _diffusion_coupling(cfg, None)
    else:
        coupling, g = _transport_coupling(cfg)
    gcfg = _get(cfg, "grid", "", dict, required=False, default={"n": 200})
    n = _get(gcfg, "n", "grid", int, required=False, default=200)
    if n < 1:
        raise ConfigError("grid.n must be >= 1", "grid.n")
    grid = Grid.uniform(n)
    initial = _initial(cfg, grid, coupling.m)
    run = _get(cfg, "run", "", dict, required=False, default={})
    return Model(kind, coupling, grid, initial, run, g)


# ---------------------------------------------------------------------------
# output helpers

def _write(out, name, text):
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _json(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _num(v):
    v = complex(v)
    if v.imag == 0:
        return float(v.real)
    return [float(v.real), float(v.imag)]


def _lambda(text, path="--lambda"):
    try:
        parts = [float(p) for p in str(text).split(",")]
    except ValueError:
        raise ConfigError("lambda must be re[,im]", path) from None
    if len(parts) == 1:
        return complex(parts[0])
    if len(parts) == 2:
        return complex(parts[0], parts[1])
    raise ConfigError("lambda must be re[,im]", path)


def _sweep(text):
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ConfigError("sweep must be start:stop:count", "--sweep") from None
    if n < 1:
        raise ConfigError("sweep count must be >= 1", "--sweep")
    return np.linspace(a, b, n)


def _region(text):
    try:
        vals = [float(v) for v in text.split(":")]
    except ValueError:
        raise ConfigError("region must be re0:re1:im0:im1", "--region") from None
    if len(vals) != 4:
        raise ConfigError("region must be re0:re1:im0:im1", "--region")
    return tuple(vals)


def _run_value(args, model, attr, key, default=None):
    v = getattr(args, attr, None)
    if v is not None:
        return v
    return model.run.get(key, default)


# ---------------------------------------------------------------------------
# commands

def cmd_validate(model, args):
    report = {"model": model.kind, "m": int(model.coupling.m), "grid_n": int(model.grid.n_segments)}
    if model.kind == "diffusion":
        dc = model.coupling
        v = posit.check_diffusion_positivity(dc)
        ok, res = check_conservation_condition(dc)
        report.update(positive=v.positive, violations=[x.as_dict() for x in v.violations],
                      conservative=ok, conservation_residual=res.tolist())
    else:
        tc = model.coupling
        v = posit.check_transport_positivity(tc)
        kappa = kappa_column_sums(tc)
        report.update(positive=v.positive, violations=[x.as_dict() for x in v.violations],
                      kappa=kappa.tolist(),
                      column_stochastic=bool(v.positive and np.all(np.abs(kappa - 1) <= 1e-12)),
                      contraction=bool(v.positive and np.all(kappa <= 1 + 1e-12)))
    text = _json(report)
    if args.out:
        _write(args.out, "validate.json", text)
    sys.stdout.write(text)
    return EXIT_OK


def _solve(model, lam, method):
    f = model.initial
    if model.kind == "diffusion":
        if method == "greiner":
            sol = diffres.solve_resolvent_greiner(lam, model.coupling, f)
        elif method == "direct":
            sol = diffres.solve_resolvent(lam, model.coupling, f)
        else:
            raise ConfigError("diffusion supports --method direct or greiner", "--method")
        return sol.u, {"lambda": _num(lam), "condition": sol.condition_estimate,
                       "boundary_residual": sol.boundary_residual,
                       "interior_residual": sol.interior_residual,
                       "iterations": sol.iterations}
    if method not in ("direct", "neumann"):
        raise ConfigError("transport supports --method direct or neumann", "--method")
    sol = transres.solve_resolvent_transport(lam, model.coupling, f, method)
    return sol.u, {"lambda": _num(lam), "condition": sol.condition_estimate,
                   "series_terms": sol.terms, **sol.diagnostics}


def cmd_resolvent(model, args):
    method = _run_value(args, model, "method", "method", "direct")
    if args.sweep:
        lams = [complex(v) for v in _sweep(args.sweep)]
    else:
        raw = _run_value(args, model, "lam", "lambda", None)
        if raw is None:
            raise ConfigError("missing lambda", "run.lambda")
        if isinstance(raw, list):
            raw = ",".join(str(v) for v in raw)
        lams = [_lambda(raw)]
    out = args.out or "."
    reports = []
    for k, lam in enumerate(lams):
        u, rep = _solve(model, lam, method)
        name = "solution.csv" if len(lams) == 1 else f"solution_{k:04d}.csv"
        _write(out, name, state_to_csv(NetworkState(u.grid, np.real(u.values))))
        if np.any(np.imag(u.values) != 0):
            _write(out, name.replace(".csv", "_imag.csv"),
                   state_to_csv(NetworkState(u.grid, np.imag(u.values))))
        rep["file"] = name
        reports.append(rep)
    _write(out, "residuals.json", _json({"method": method, "solves": reports}))
    return EXIT_OK


def cmd_evolve(model, args):
    T = float(_run_value(args, model, "time", "time", 1.0))
    out = args.out or "."
    if model.kind == "diffusion":
        steps = int(_run_value(args, model, "steps", "steps", 100))
        dt_out = model.run.get("dt_out")
        traj = evolve.diffusion_evolve(model.initial, model.coupling, T, steps, dt_out)
    else:
        steps = _run_value(args, model, "steps", "steps", None)
        dt_out = model.run.get("dt_out", T / int(steps) if steps else T / 10)
        traj = evolve.transport_evolve(model.initial, model.coupling, T, dt_out)
    obs = evolve.observables(traj, model.coupling if model.kind == "transport" else None)
    _write(out, "trajectory.csv", evolve.trajectory_to_csv(traj))
    _write(out, "observables.csv", evolve.observables_to_csv(obs))
    return EXIT_OK


def cmd_spectrum(model, args):
    region = args.region or model.run.get("region")
    if region is None:
        raise ConfigError("missing region", "run.region")
    region = _region(region) if isinstance(region, str) else tuple(float(v) for v in region)
    if len(region) != 4:
        raise ConfigError("region must have four entries", "run.region")
    step = float(model.run.get("grid_step", 0.25))
    if model.kind == "diffusion":
        def det(z):
            return spectral.char_det_diffusion(z, model.coupling)
    else:
        def det(z):
            return spectral.char_det_transport(z, model.coupling)
    roots = spectral.find_roots(det, region, step)
    _write(args.out or ".", "roots.csv", spectral.roots_to_csv(roots))
    return EXIT_OK


def cmd_witness(model, args):
    out = args.out or "."
    if model.kind == "diffusion":
        state, spec = posit.diffusion_pmp_witness(model.coupling, model.grid)
        _write(out, "witness_state.csv", state_to_csv(state))
        _write(out, "certificate.json", spec.certificate_json() + "\n")
        return EXIT_OK
    w = posit.transport_negativity_witness(model.coupling, model.grid)
    t_end = w.t_window[1]
    times = np.linspace(0.0, t_end, 11)[:-1]
    traj = evolve.transport_evolve(w.initial, model.coupling, float(times[-1]),
                                   float(times[1] - times[0]))
    x = model.grid.nodes
    err, mn = 0.0, 0.0
    for t, s in zip(traj.times, traj.states):
        ok = w.valid(x, t)
        if np.any(ok):
            vals = s.values[w.edge][ok]
            err = max(err, float(np.max(np.abs(vals - w.predict(x[ok], t)))))
            mn = min(mn, float(vals.min()))
    doc = {"violation": {"block": "K", "i": w.edge, "j": w.source, "value": w.k, "required": ">= 0"},
           "edge": w.edge, "source": w.source, "t_window": list(w.t_window),
           "max_prediction_error": err, "min_value": mn}
    _write(out, "witness_state.csv", state_to_csv(w.initial))
    _write(out, "certificate.json", _json(doc))
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "resolvent": cmd_resolvent, "evolve": cmd_evolve,
            "spectrum": cmd_spectrum, "witness": cmd_witness}


def build_parser():
    p = argparse.ArgumentParser(prog="netsemi", description="Diffusion and transport on networks.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--lambda", dest="lam", default=None, help="re[,im]")
    p.add_argument("--sweep", default=None, help="start:stop:count (real lambda)")
    p.add_argument("--time", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--method", choices=["direct", "neumann", "greiner"], default=None)
    p.add_argument("--region", default=None, help="re0:re1:im0:im1")
    return p


def _diag(kind, exc, **extra):
    doc = {"error": kind, "message": str(exc), **extra}
    path = getattr(exc, "path", None)
    if path:
        doc["path"] = path
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        model = load_config(args.config)
        return COMMANDS[args.command](model, args)
    except SinkPresent as exc:
        _diag("sink", exc, vertices=list(exc.sinks))
        return EXIT_CONFIG
    except ValidationError as exc:
        _diag("config", exc)
        return EXIT_CONFIG
    except (NearSpectrum, NoContraction, SeriesDiverges) as exc:
        extra = {}
        if getattr(exc, "condition", None) is not None:
            extra["condition"] = exc.condition if np.isfinite(exc.condition) else "inf"
        _diag(type(exc).__name__, exc, **extra)
        return EXIT_SPECTRUM
    except NotViolating as exc:
        _diag("NotViolating", exc)
        return EXIT_NOT_VIOLATING
    except NetsemiError as exc:
        _diag(type(exc).__name__, exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
