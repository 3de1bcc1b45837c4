"""Command-line experiment runner.

Every quantity subcommand maps onto one estimator; ``check`` runs the
inequality checks, ``sweep`` expands parameter grids, ``run`` executes a JSON
experiment file and ``plot`` turns a CSV into an SVG.  Records go out as
JSON lines (stdout by default) and optionally as CSV.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import re
import sys
from pathlib import Path

import jsonschema

from . import estimators as est
from . import inequalities as ineq
from .events import ConnectionEvent
from .fixtures import FIXTURES, P_GRID
from .lattice import GeometryError, LatticeSpec, Region
from .mc import default_workers
from .plot import plot_csv
from .randomwalk import compare_tau_green, phi_rw
from .records import Estimate, _jsonable, csv_text, dumps, version_string
from .regularity import RegularityParams, pioneer_fractions, volume_tail


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# value parsing (flags arrive as strings, config values as JSON)


def _vertex(v) -> tuple:
    if isinstance(v, str):
        return tuple(int(t) for t in v.split(",") if t.strip())
    return tuple(int(t) for t in v)


def _floats(v) -> list:
    if isinstance(v, str):
        return [float(t) for t in v.split(",") if t.strip()]
    if isinstance(v, (int, float)):
        return [float(v)]
    return [float(t) for t in v]


def _ints(v) -> list:
    if isinstance(v, str):
        return [int(t) for t in v.split(",") if t.strip()]
    if isinstance(v, int):
        return [v]
    return [int(t) for t in v]


def _bool(v) -> bool:
    if isinstance(v, str):
        return v.lower() in ("1", "true", "yes")
    return bool(v)


def _region_raw(v):
    return v


# name -> (converter, help)
OPTIONS = {
    "region": (_region_raw, "region S: box:R[@c], slab:l,depth,width, tube:k:dirs, set:x;y;..."),
    "lam": (_region_raw, "enclosing region Lambda (defaults to Z^d where allowed)"),
    "outer": (_region_raw, "outer regions for partial-monotonicity (repeat or list in config)"),
    "x": (_vertex, "vertex, comma separated"),
    "y": (_vertex, "vertex, comma separated"),
    "o": (_vertex, "base vertex o (default origin)"),
    "radius": (int, "box radius n"),
    "box_radius": (int, "radius of the simulation box"),
    "pc": (float, "known critical point (warns when p >= pc)"),
    "direction": (_floats, "direction vector"),
    "radii": (_ints, "increasing list of distances"),
    "order": (float, "order phi of the correlation length"),
    "k_max": (int, "largest box radius scanned"),
    "z": (float, "confidence multiplier"),
    "k": (int, "box or block radius"),
    "bracket": (_floats, "lo,hi bracket for p"),
    "tol": (float, "bisection tolerance"),
    "facet": (_region_raw, "facet vertex set"),
    "dirs": (_ints, "tube steps (signed axes, 1-based)"),
    "axis": (int, "facet axis (1-based)"),
    "sign": (int, "facet sign, +1 or -1"),
    "V": (_region_raw, "window V for the volume tail"),
    "t": (_floats, "threshold grid"),
    "classify": (_bool, "also classify pioneers (regular / escapable)"),
    "K": (int, "regularity scale K"),
    "T": (float, "regularity constant T"),
    "fixture": (str, "named fixture: " + ", ".join(sorted(FIXTURES))),
    "method": (str, "exact method: enumerate, frontier or auto"),
    "eps": (float, "relative distance cut for far-reversed-sl"),
    "n_inner": (int, "inner samples per outer configuration (reversed-sl, mc)"),
}

COMMON = {
    "d": (int, "dimension"),
    "L": (int, "range (1 = nearest neighbour)"),
    "p": (_floats, "edge probability; a comma list is a p-grid"),
    "n": (int, "Monte Carlo sample count"),
    "seed": (int, "master seed"),
    "workers": (int, "worker processes"),
    "mode": (str, "mc or exact"),
}

DEFAULTS = {"d": 2, "L": 1, "seed": 0, "mode": "mc"}

COMMAND_OPTIONS = {
    "tau": ["region", "x", "y", "method"],
    "phi": ["region", "lam"],
    "pioneers": ["region", "lam", "classify", "K", "T"],
    "theta": ["radius"],
    "chi": ["box_radius", "pc"],
    "xi": ["direction", "radii", "box_radius"],
    "xi-phi": ["order", "box_radius"],
    "sharp-length": ["k_max", "z"],
    "pc": ["k", "bracket", "tol"],
    "facet-sum": ["region", "facet"],
    "tube": ["k", "dirs", "axis", "sign"],
    "rw-compare": ["region"],
    "volume-tail": ["region", "V", "t"],
    "check": ["fixture", "region", "lam", "outer", "o", "x", "radius", "K", "T", "n_inner", "method", "eps"],
}

CHECKS = ("exact-core", "simon-lieb", "reversed-sl", "effective-reversed-sl", "far-reversed-sl",
          "fkg", "bk", "euv",
          "derivative", "pioneer-sandwich", "partial-monotonicity")

# keys that are lists by nature and so never trigger a sweep
LIST_VALUED = {"p", "direction", "radii", "bracket", "dirs", "t", "outer"}


# --------------------------------------------------------------------------
# helpers


def _spec(o) -> LatticeSpec:
    return LatticeSpec(int(o["d"]), int(o["L"]))


def _region(value, o, default=None):
    if value is None:
        if default is None:
            raise ConfigError("a region is required")
        value = default
    if isinstance(value, Region):
        return value
    d = int(o["d"])
    named = o.get("_regions", {})
    if isinstance(value, str) and value in named:
        value = named[value]
    if isinstance(value, dict):
        return Region.from_json(value, d=d)
    return Region.parse(str(value), d)


def _need(o, *keys):
    for k in keys:
        if o.get(k) is None:
            raise ConfigError(f"missing required option --{k.replace('_', '-')}")


def _kw(o, *keys, rename=None):
    rename = rename or {}
    return {rename.get(k, k): o[k] for k in keys if o.get(k) is not None}


def _single_p(o) -> float:
    ps = o.get("p")
    if ps is None:
        raise ConfigError("missing required option --p")
    if len(ps) != 1:
        raise ConfigError("this command takes a single p")
    p = ps[0]
    if not 0 <= p <= 1:
        raise ConfigError(f"p must lie in [0, 1], got {p}")
    return p


def _origin(o) -> tuple:
    return (0,) * int(o["d"])


def _estimate_record(e: Estimate) -> dict:
    return e.to_record()


def _check_record(r) -> dict:
    rec = r.to_record()
    rec["quantity"] = "check:" + r.name
    return rec


# --------------------------------------------------------------------------
# quantity handlers: (options, p) -> list of records


def _h_tau(o, p):
    _need(o, "y")
    spec, S = _spec(o), _region(o.get("region"), o, "box:1")
    x = o.get("x") or _origin(o)
    if o["mode"] == "exact":
        e = est.tau_exact(spec, S, p, x, o["y"], method=o.get("method") or "auto")
    else:
        e = est.tau(spec, S, p, x, o["y"], **_kw(o, "n", "seed", "workers"))
    return [_estimate_record(e)]


def _h_phi(o, p):
    spec, S = _spec(o), _region(o.get("region"), o, "box:1")
    lam = _region(o["lam"], o) if o.get("lam") is not None else None
    e = est.phi(spec, S, p, Lam=lam, mode=o["mode"], **_kw(o, "n", "seed", "workers"))
    return [_estimate_record(e)]


def _h_pioneers(o, p):
    spec, S = _spec(o), _region(o.get("region"), o, "box:1")
    out = [_estimate_record(est.pioneers(spec, S, p, mode=o["mode"], **_kw(o, "n", "seed", "workers")))]
    if o.get("classify"):
        lam = _region(o.get("lam"), o, S.describe())
        params = RegularityParams(**_kw(o, "K", "T"))
        fr = pioneer_fractions(spec, S, lam, p, params, **_kw(o, "n", "seed"))
        out.append(Estimate(fr["X_fraction"], 0.0, fr["n"], o["seed"], "mc", diagnostics=fr,
                            quantity="pioneer_classification",
                            params=dict(est._params(spec, S, p), Lam=lam.describe(),
                                        K=params.K, T=params.T)).to_record())
    return out


def _h_theta(o, p):
    _need(o, "radius")
    e = est.theta(_spec(o), o["radius"], p, mode=o["mode"], **_kw(o, "n", "seed", "workers"))
    return [_estimate_record(e)]


def _h_chi(o, p):
    _need(o, "box_radius")
    e = est.chi(_spec(o), p, o["box_radius"], p_c=o.get("pc"), **_kw(o, "n", "seed", "workers"))
    return [_estimate_record(e)]


def _h_xi(o, p):
    _need(o, "radii")
    spec = _spec(o)
    direction = o.get("direction") or [1.0] + [0.0] * (spec.d - 1)
    fit = est.xi_directional(spec, direction, p, o["radii"],
                             **_kw(o, "n", "seed", "box_radius", "workers", rename={"n": "samples"}))
    params = est._params(spec, None, p, direction=list(direction), radii=list(o["radii"]))
    return [Estimate(fit.xi, fit.stderr, o.get("n") or 100_000, o["seed"], "mc",
                     diagnostics=fit, quantity="xi", params=params).to_record()]


def _h_xi_phi(o, p):
    _need(o, "order", "box_radius")
    e = est.xi_phi(_spec(o), o["order"], p, o["box_radius"], **_kw(o, "n", "seed", "workers"))
    return [_estimate_record(e)]


def _h_sharp_length(o, p):
    _need(o, "k_max")
    spec = _spec(o)
    sl = est.sharp_length(spec, p, o["k_max"], **_kw(o, "n", "seed", "z", "workers"))
    return [Estimate(sl.value, 0.0, o.get("n") or 10_000, o["seed"], "mc", diagnostics=sl,
                     quantity="sharp_length",
                     params=est._params(spec, None, p, k_max=o["k_max"])).to_record()]


def _h_pc(o, _p):
    _need(o, "k", "n")
    spec = _spec(o)
    bracket = tuple(o.get("bracket") or (0.0, 1.0))
    r = est.estimate_pc(spec, o["k"], o["n"], p_bracket=bracket, **_kw(o, "tol", "seed", "workers"))
    params = {"d": spec.d, "L": spec.range, "region": "", "p": "", "k": o["k"],
              "bracket": list(bracket)}
    return [Estimate(r.p_c, 0.0, o["n"], o["seed"], "mc",
                     diagnostics={"lo": r.lo, "hi": r.hi, "width": r.width, "steps": r.steps},
                     quantity="p_c", params=params).to_record()]


def _h_facet_sum(o, p):
    _need(o, "facet")
    spec = _spec(o)
    Q = _region(o.get("region"), o, "box:1")
    F = _region(o["facet"], o)
    e = est.facet_sum(spec, Q, F.vertices, p, mode=o["mode"], **_kw(o, "n", "seed", "workers"))
    return [_estimate_record(e)]


def _h_tube(o, p):
    _need(o, "k", "dirs")
    out = est.tube_facet_sums(_spec(o), o["k"], o["dirs"], p,
                              **_kw(o, "n", "seed", "axis", "sign", "workers"))
    return [_estimate_record(e) for e in out]


def _h_rw_compare(o, p):
    spec, S = _spec(o), _region(o.get("region"), o, "box:2")
    out = [Estimate(phi_rw(spec, S), 0.0, 1, None, "exact", quantity="phi_rw",
                    params=est._params(spec, S, "")).to_record()]
    cmp = compare_tau_green(spec, S, p, **_kw(o, "n", "seed"))
    for row in cmp.rows:
        out.append(Estimate(row["tau"], row["tau_stderr"], o.get("n") or 10_000, o["seed"], "mc",
                            diagnostics={"green": row["green"], "ratio": row["ratio"]},
                            quantity="tau_vs_green",
                            params=est._params(spec, S, p, x=row["x"], green=row["green"])).to_record())
    return out


def _h_volume_tail(o, p):
    _need(o, "V", "t")
    spec = _spec(o)
    region = _region(o.get("region"), o, "box:4")
    V = _region(o["V"], o)
    vt = volume_tail(spec, p, region, V.vertices, o["t"], **_kw(o, "n", "seed"))
    params = est._params(spec, region, p, V=V.describe(), scale=vt.scale)
    return [e.to_record() for e in vt.estimates(params, o["seed"])]


QUANTITIES = {
    "tau": _h_tau, "phi": _h_phi, "pioneers": _h_pioneers, "theta": _h_theta, "chi": _h_chi,
    "xi": _h_xi, "xi-phi": _h_xi_phi, "sharp-length": _h_sharp_length, "pc": _h_pc,
    "facet-sum": _h_facet_sum, "tube": _h_tube, "rw-compare": _h_rw_compare,
    "volume-tail": _h_volume_tail,
}


# --------------------------------------------------------------------------
# checks


def _fixture_p_grid(o):
    return o["p"] if o.get("p") is not None else list(P_GRID)


def _fixture_tuples(fx, o):
    if o.get("region") is not None:
        return [(o.get("o") or _origin(o), o.get("x") or _origin(o), _region(o["region"], o))]
    return fx.tuples


def run_check(name: str, o) -> list:
    """CheckReports for one named check."""
    reports = _run_check(name, o)
    fx = o.get("fixture")
    if fx and name != "exact-core":
        for r in reports:
            r.instance = f"[{fx}] {r.instance}"
    return reports


def _run_check(name: str, o) -> list:
    if name not in CHECKS:
        raise ConfigError(f"unknown check {name!r}; known: {', '.join(CHECKS)}")
    fx = None
    if o.get("fixture"):
        try:
            fx = FIXTURES[o["fixture"]]
        except KeyError:
            raise ConfigError(f"unknown fixture {o['fixture']!r}; known: {', '.join(sorted(FIXTURES))}")
        o = dict(o, d=fx.spec.d, L=fx.spec.range)
    spec = fx.spec if fx is not None else _spec(o)
    mode = o["mode"]
    seed = o["seed"]
    n = o.get("n")
    ps = _fixture_p_grid(o) if fx is not None or name in ("exact-core", "derivative") else [_single_p(o)]
    if name == "derivative" and o.get("p") is None:
        ps = [round(0.1 * i, 1) for i in range(1, 10)]

    if name == "exact-core":
        return ineq.exact_core_suite([fx] if fx is not None else None, ps)
    if name == "derivative":
        return [ineq.check_derivative_identity(spec, o.get("radius") or 1, p) for p in ps]

    if fx is not None:
        Lam = fx.Lam
        tuples = _fixture_tuples(fx, o)
    else:
        Lam = _region(o.get("lam"), o) if o.get("lam") is not None else None
        tuples = [(o.get("o") or _origin(o), o.get("x") or _origin(o), _region(o.get("region"), o, "box:1"))]

    out = []
    if name in ("fkg", "bk"):
        if fx is None:
            raise ConfigError(f"check {name} needs --fixture")
        for evA, evB in fx.events:
            for p in ps:
                if name == "fkg":
                    out.append(ineq.check_fkg(fx.graph, evA, evB, p, mode=mode,
                                              **_kw(o, "n", "seed")))
                elif isinstance(evA, ConnectionEvent) and isinstance(evB, ConnectionEvent):
                    out.append(ineq.check_bk(fx.graph, evA, evB, p))
        return out
    if name == "euv":
        if fx is None:
            raise ConfigError("check euv needs --fixture")
        for t_o, t_x, S in tuples:
            out.extend(ineq.check_euv(fx, t_o, t_x, S))
        return out
    if name == "pioneer-sandwich":
        sets = [S for t_o, _, S in tuples if _origin(o) in S.vertex_set]
        if fx is not None and _origin(o) in Lam.vertex_set:
            sets.append(Lam)
        for S in sets:
            for p in ps:
                out.append(ineq.check_pioneer_sandwich(spec, S, p, mode=mode, **_kw(o, "n", "seed")))
        return out
    if name == "partial-monotonicity":
        outer = o.get("outer") or ([Lam] if Lam is not None else None)
        if not outer:
            raise ConfigError("partial-monotonicity needs --outer regions")
        outer = [_region(r, o) for r in outer]
        for _, _, S in tuples:
            for p in ps:
                out.extend(ineq.check_partial_monotonicity(spec, S, outer, p, **_kw(o, "n", "seed")))
        return out
    if Lam is None:
        raise ConfigError(f"check {name} needs --lam or --fixture")
    for t_o, t_x, S in tuples:
        for p in ps:
            if name == "simon-lieb":
                out.append(ineq.check_simon_lieb(spec, t_o, t_x, S, Lam, p, mode=mode,
                                                 method=o.get("method") or "auto",
                                                 **_kw(o, "n", "seed")))
            elif name == "reversed-sl":
                out.append(ineq.check_reversed_sl(spec, t_o, t_x, S, Lam, p, mode=mode,
                                                  **_kw(o, "n", "n_inner", "seed",
                                                        rename={"n": "n_outer"})))
            elif name == "far-reversed-sl":
                out.append(ineq.check_far_reversed_sl(spec, t_o, t_x, S, Lam, p,
                                                      **_kw(o, "eps", "n", "seed"), mode=mode))
            elif name == "effective-reversed-sl":
                params = RegularityParams(**_kw(o, "K", "T")) if o.get("T") or o.get("K") else None
                out.append(ineq.check_effective_reversed_sl(spec, t_o, t_x, S, Lam, p, params,
                                                            **_kw(o, "n", "seed")))
    return out


# --------------------------------------------------------------------------
# execution


def _echo(o) -> dict:
    skip = {"workers", "out", "csv", "svg", "plot", "_regions"}
    return _jsonable({k: v for k, v in sorted(o.items()) if k not in skip and v is not None})


def _expand(o, sweep: dict) -> list:
    """Cartesian product over the sweep keys (last key varies fastest)."""
    keys = list(sweep)
    grids = [sweep[k] for k in keys]
    return [dict(o, **dict(zip(keys, combo))) for combo in itertools.product(*grids)]


def execute(command: str, o: dict, sweep: dict | None = None) -> tuple[list, bool]:
    """Run one command (with an optional sweep); returns (records, all asserted checks passed)."""
    records, ok = [], True
    for point in _expand(o, sweep or {}):
        echo = _echo(dict(point, command=command))
        if command == "check":
            reports = run_check(point["check"], point)
            for r in reports:
                rec = _check_record(r)
                rec.update(seed=point["seed"], version=version_string(), echo=echo)
                records.append(rec)
                if r.asserted and not r.passed:
                    ok = False
            continue
        handler = QUANTITIES[command]
        ps = [None] if command == "pc" else point.get("p")
        if ps is None:
            raise ConfigError("missing required option --p")
        for p in ps:
            if p is not None and not 0 <= p <= 1:
                raise ConfigError(f"p must lie in [0, 1], got {p}")
            for rec in handler(point, p):
                rec["echo"] = echo
                if rec.get("seed") is None:
                    rec["seed"] = point["seed"]
                rec.setdefault("version", version_string())
                records.append(rec)
    return records, ok


def _csv_records(records) -> list:
    out = []
    for rec in records:
        if "verdict" in rec:
            out.append({"quantity": rec["quantity"], "mean": rec["lhs"], "stderr": rec["stderr"],
                        "n": "", "seed": rec.get("seed"), "mode": rec["mode"],
                        "params": {"instance": rec["instance"], "rhs": rec["rhs"],
                                   "verdict": rec["verdict"], "gap": rec["gap"]}})
        else:
            out.append(rec)
    return out


def emit(records, o: dict, stdout=None) -> None:
    stdout = stdout or sys.stdout
    lines = "".join(dumps(r) + "\n" for r in records)
    if o.get("out"):
        Path(o["out"]).write_text(lines, encoding="utf-8")
    elif not o.get("csv"):
        stdout.write(lines)
    if o.get("csv"):
        Path(o["csv"]).write_text(csv_text(_csv_records(records)), encoding="utf-8")
    plot = o.get("plot")
    if o.get("svg") and o.get("csv") and plot:
        svg = plot_csv(o["csv"], plot.get("x", "p"), plot.get("y", "mean"),
                       loglog=bool(plot.get("loglog", False)))
        Path(o["svg"]).write_text(svg, encoding="utf-8")


def _summary(records, stream) -> None:
    checks = [r for r in records if "verdict" in r]
    if not checks:
        return
    bad = [r for r in checks if r["verdict"] == "FAIL"]
    stream.write(f"{len(checks)} checks, {len(bad)} failed\n")
    for r in bad:
        stream.write(f"FAIL {r['name']} {r['instance']} gap={r['gap']!r}\n")


# --------------------------------------------------------------------------
# config files


CONFIG_SCHEMA = {
    "type": "object",
    "required": ["command"],
    "additionalProperties": False,
    "properties": {
        "command": {"enum": sorted(QUANTITIES) + ["check"]},
        "check": {"enum": list(CHECKS)},
        "lattice": {
            "type": "object", "additionalProperties": False,
            "properties": {"d": {"type": "integer", "minimum": 1},
                           "L": {"type": "integer", "minimum": 1}},
        },
        "regions": {"type": "object", "additionalProperties": {"type": ["string", "object"]}},
        "p": {"oneOf": [{"type": "number", "minimum": 0, "maximum": 1},
                        {"type": "array", "minItems": 1,
                         "items": {"type": "number", "minimum": 0, "maximum": 1}}]},
        "n": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "mode": {"enum": ["mc", "exact"]},
        "params": {"type": "object", "propertyNames": {"enum": sorted(OPTIONS)}},
        "sweep": {"type": "object", "propertyNames": {"enum": sorted(OPTIONS)},
                  "additionalProperties": {"type": "array", "minItems": 1}},
        "regularity": {
            "type": "object", "additionalProperties": False,
            "properties": {"K": {"type": "integer", "minimum": 2},
                           "T": {"type": "number", "exclusiveMinimum": 0}},
        },
        "outputs": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "jsonl": {"type": "string"}, "csv": {"type": "string"}, "svg": {"type": "string"},
                "plot": {"type": "object", "additionalProperties": False,
                         "properties": {"x": {"type": "string"}, "y": {"type": "string"},
                                        "loglog": {"type": "boolean"}}},
            },
        },
    },
    "allOf": [{"if": {"properties": {"command": {"const": "check"}}},
               "then": {"required": ["check"]}}],
}


def _line_of(text: str, path) -> int:
    """Best-effort line number of a JSON path: each key is searched after the previous one."""
    pos = 0
    for part in path:
        if isinstance(part, int):
            continue
        m = re.compile(r'"' + re.escape(str(part)) + r'"\s*:').search(text, pos)
        if not m:
            break
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def load_config(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        field = "/".join(map(str, err.absolute_path)) or "<root>"
        raise ConfigError(f"{path}:{_line_of(text, err.absolute_path)}: field {field}: {err.message}")
    regions = cfg.get("regions", {})
    d = cfg.get("lattice", {}).get("d", DEFAULTS["d"])
    for name, r in regions.items():
        try:
            Region.from_json(r, d=d) if isinstance(r, dict) else Region.parse(r, d)
        except (GeometryError, ValueError, KeyError) as exc:
            raise ConfigError(f"{path}:{_line_of(text, ['regions', name])}: field regions/{name}: "
                              f"{exc}") from None
    for key, value in {**cfg.get("params", {}), **cfg.get("sweep", {})}.items():
        if key in ("region", "lam", "facet", "V") and isinstance(value, str) and ":" not in value \
                and value not in regions:
            raise ConfigError(f"{path}:{_line_of(text, ['params', key])}: field params/{key}: "
                              f"unresolved region {value!r}")
    return cfg


def config_options(cfg: dict) -> tuple[str, dict, dict]:
    """(command, options, sweep) from a validated config."""
    o = dict(DEFAULTS)
    o.update(cfg.get("lattice", {}))
    for key in ("n", "seed", "workers", "mode"):
        if key in cfg:
            o[key] = cfg[key]
    if "p" in cfg:
        o["p"] = _floats(cfg["p"])
    for key, value in cfg.get("params", {}).items():
        o[key] = OPTIONS[key][0](value) if value is not None else None
    o.update({k: v for k, v in cfg.get("regularity", {}).items() if k in ("K", "T")})
    outs = cfg.get("outputs", {})
    o.update(out=outs.get("jsonl"), csv=outs.get("csv"), svg=outs.get("svg"), plot=outs.get("plot"))
    o["_regions"] = cfg.get("regions", {})
    sweep = {k: [OPTIONS[k][0](v) for v in vals] for k, vals in cfg.get("sweep", {}).items()}
    if cfg["command"] == "check":
        o["check"] = cfg["check"]
    return cfg["command"], o, sweep


# --------------------------------------------------------------------------
# argument parsing


def _add_options(ap: argparse.ArgumentParser, names) -> None:
    for name in names:
        conv, help_ = OPTIONS[name] if name in OPTIONS else COMMON[name]
        flag = "--" + name.replace("_", "-")
        kwargs = dict(dest=name, default=argparse.SUPPRESS, help=help_)
        if name == "outer":
            ap.add_argument(flag, action="append", **kwargs)
        elif name == "classify":
            ap.add_argument(flag, action="store_true", **kwargs)
        else:
            ap.add_argument(flag, type=conv, **kwargs)


def _add_common(ap: argparse.ArgumentParser) -> None:
    _add_options(ap, COMMON)
    ap.add_argument("--out", default=argparse.SUPPRESS, help="JSON-lines output path (default stdout)")
    ap.add_argument("--csv", default=argparse.SUPPRESS, help="CSV output path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="percolab", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")
    _sub_add = sub.add_parser
    sub.add_parser = lambda *a, **k: _sub_add(*a, allow_abbrev=False, **k)
    for name in QUANTITIES:
        sp = sub.add_parser(name, help=(QUANTITIES[name].__doc__ or name))
        _add_common(sp)
        _add_options(sp, COMMAND_OPTIONS[name])
    sp = sub.add_parser("check", help="run an inequality check")
    sp.add_argument("check", choices=CHECKS)
    _add_common(sp)
    _add_options(sp, COMMAND_OPTIONS["check"])
    sp = sub.add_parser("sweep", help="run a quantity over a parameter grid")
    sp.add_argument("quantity", choices=sorted(QUANTITIES) + ["check"])
    sp.add_argument("--over", action="append", default=[], metavar="KEY=V1,V2,...",
                    help="sweep axis; repeat for a product grid")
    sp.add_argument("--svg", help="SVG plot of the CSV output")
    sp.add_argument("--plot-x", default=None)
    sp.add_argument("--plot-y", default="mean")
    sp.add_argument("--loglog", action="store_true")
    sp = sub.add_parser("run", help="run a JSON experiment file (flags after it override)")
    sp.add_argument("config")
    sp = sub.add_parser("plot", help="SVG plot of two CSV columns")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--loglog", action="store_true")
    sp.add_argument("--out", default=None, help="SVG path (default: input with .svg)")
    sp.add_argument("--title", default="")
    return ap


def _command_parser(command: str) -> argparse.ArgumentParser:
    sp = argparse.ArgumentParser(prog=f"percolab {command}", allow_abbrev=False)
    if command == "check":
        sp.add_argument("check", choices=CHECKS + (None,), nargs="?", default=None)
    _add_common(sp)
    _add_options(sp, COMMAND_OPTIONS[command])
    return sp


def _split_over(items, command) -> dict:
    sweep = {}
    for item in items:
        key, sep, vals = item.partition("=")
        key = key.replace("-", "_")
        if not sep or key not in OPTIONS and key not in COMMON:
            raise ConfigError(f"bad --over {item!r}")
        conv = OPTIONS[key][0] if key in OPTIONS else COMMON[key][0]
        parts = vals.split(";") if key in LIST_VALUED or key in ("x", "y", "o") else vals.split(",")
        if key == "p":
            sweep[key] = [[float(v)] for v in vals.split(",")]
        else:
            sweep[key] = [conv(v) for v in parts]
    return sweep


def _env(o: dict, explicit: dict) -> dict:
    if "seed" not in explicit and os.environ.get("PERCOLAB_SEED"):
        o["seed"] = int(os.environ["PERCOLAB_SEED"])
    if "workers" not in explicit:
        if os.environ.get("PERCOLAB_WORKERS"):
            o["workers"] = default_workers()
        o.setdefault("workers", 1)
    return o


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    if not argv:
        ap.print_usage(sys.stderr)
        return 2
    command = argv[0]
    try:
        if command == "plot":
            a = ap.parse_args(argv)
            svg = plot_csv(a.inp, a.x, a.y, loglog=a.loglog, title=a.title)
            out = a.out or str(Path(a.inp).with_suffix(".svg"))
            Path(out).write_text(svg, encoding="utf-8")
            print(out)
            return 0
        if command == "run":
            if len(argv) < 2:
                ap.parse_args(argv)
            cfg = load_config(argv[1])
            cmd, o, sweep = config_options(cfg)
            explicit = {k: v for k, v in vars(_command_parser(cmd).parse_args(argv[2:])).items()
                        if v is not None}
            o = _env(o, explicit)
            o.update(explicit)
            if "check" in explicit:
                o["check"] = explicit["check"]
        elif command == "sweep":
            head = build_parser()
            known, rest = head.parse_known_args(argv)
            cmd = known.quantity
            explicit = {k: v for k, v in vars(_command_parser(cmd).parse_args(rest)).items()
                        if v is not None}
            o = _env(dict(DEFAULTS), explicit)
            o.update(explicit)
            sweep = _split_over(known.over, cmd)
            if known.svg:
                o["svg"] = known.svg
                o["plot"] = {"x": known.plot_x or next(iter(sweep), "p"), "y": known.plot_y,
                             "loglog": known.loglog}
        else:
            a = ap.parse_args(argv)
            cmd = a.command
            explicit = {k: v for k, v in vars(a).items() if k != "command"}
            o = _env(dict(DEFAULTS), explicit)
            o.update(explicit)
            sweep = {}
        if cmd == "check" and "check" not in o:
            raise ConfigError("check needs a check name")
        records, ok = execute(cmd, o, sweep)
        emit(records, o)
        _summary(records, sys.stderr)
        return 0 if ok else 1
    except (ConfigError, GeometryError, ValueError, FileNotFoundError) as exc:
        print(f"percolab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
