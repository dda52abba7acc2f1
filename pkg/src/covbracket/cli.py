"""Command-line front end: verification suites, tables and simulations from a JSON config.

Exit codes: 0 all checks passed, 1 a check or an integration failed,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

OUTPUT_ENV = "COVBRACKET_OUTPUT_DIR"

DEFAULTS = {
    "lattice": {"delta_k": 1.0, "n_max": 1},
    "constants": {"a": 4.0, "c": 1.0},
    "suites": ["brackets", "gupta-bleuler", "pauli-jordan", "dynamics"],
    "dynamics": {
        "m0": 1.0, "e": 0.0, "dt": 0.01, "steps": 100,
        "x": [0.0, 0.0, 0.0, 0.0], "velocity": [0.0, 0.0, 0.0],
        "coupling": "external_only", "source": "retarded", "clock": "lab",
        "wave": None, "symplectic": False, "fd_step": 1e-6, "field_scale": 0.0,
    },
    "pauli_jordan": {"x0": [-1.0, 1.0, 5], "r": [0.0, 2.0, 5], "refine": False},
    "boost": {"x": [1.0, 0.3, 0.2, 0.1], "rapidity": 0.5, "axis": "x", "n_max": [2, 4, 8]},
    "output": {"dir": "."},
    "seed": 0,
}
WAVE_KEYS = {"amplitude", "k", "phase"}
SUITES = ("brackets", "gupta-bleuler", "pauli-jordan", "dynamics")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration

def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if k == "wave" and v is not None:
            if not isinstance(v, dict) or set(v) - WAVE_KEYS or not {"amplitude", "k"} <= set(v):
                raise ConfigError("wave needs keys amplitude, k and optional phase")
            out[k] = v
        elif isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where!r} must be an object")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


def _set(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    node, ref = cfg, DEFAULTS
    for p in parts[:-1]:
        if p not in ref or not isinstance(ref[p], dict):
            raise ConfigError(f"unknown config key {key!r}")
        node, ref = node[p], ref[p]
    if parts[-1] not in ref:
        raise ConfigError(f"unknown config key {key!r}")
    if isinstance(ref[parts[-1]], dict) and parts[-1] != "wave":
        raise ConfigError(f"{key!r} is not a scalar field")
    node[parts[-1]] = value


def validate(cfg: dict) -> dict:
    lat = cfg["lattice"]
    if not (isinstance(lat["delta_k"], (int, float)) and lat["delta_k"] > 0):
        raise ConfigError("lattice.delta_k must be a positive number")
    if not (isinstance(lat["n_max"], int) and 1 <= lat["n_max"] <= 12):
        raise ConfigError("lattice.n_max must be an integer in 1..12")
    if cfg["constants"]["a"] == 0 or not cfg["constants"]["c"] > 0:
        raise ConfigError("constants: a must be non-zero and c positive")
    bad = [s for s in cfg["suites"] if s not in SUITES]
    if bad:
        raise ConfigError(f"unknown suites {bad}")
    d = cfg["dynamics"]
    if not d["dt"] > 0 or not isinstance(d["steps"], int) or d["steps"] < 0:
        raise ConfigError("dynamics.dt must be positive and steps a non-negative integer")
    if not d["m0"] > 0:
        raise ConfigError("dynamics.m0 must be positive")
    for name, allowed in (("coupling", ("external_only", "coupled")), ("source", ("retarded", "canonical")),
                          ("clock", ("lab", "proper"))):
        if d[name] not in allowed:
            raise ConfigError(f"dynamics.{name} must be one of {allowed}")
    if len(d["x"]) != 4 or len(d["velocity"]) != 3 or sum(v * v for v in d["velocity"]) >= cfg["constants"]["c"] ** 2:
        raise ConfigError("dynamics.x needs 4 entries and velocity 3 entries below c")
    pj = cfg["pauli_jordan"]
    for name in ("x0", "r"):
        rng_ = pj[name]
        if len(rng_) != 3 or not isinstance(rng_[2], int) or rng_[2] < 1 or not rng_[0] <= rng_[1]:
            raise ConfigError(f"pauli_jordan.{name} must be [start, stop, count] with start <= stop")
    b = cfg["boost"]
    if abs(b["rapidity"]) > 2 or b["axis"] not in ("x", "y", "z") or len(b["x"]) != 4:
        raise ConfigError("boost: |rapidity| <= 2, axis in x/y/z, x with 4 entries")
    return cfg


def load_config(path: str | None, sets: list[str]) -> dict:
    over = {}
    if path:
        try:
            with open(path) as fh:
                over = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(over, dict):
            raise ConfigError("config must be a JSON object")
    cfg = _merge(DEFAULTS, over)
    for s in sets:
        _set(cfg, s)
    try:
        return validate(cfg)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc


def output_dir(cfg: dict) -> str:
    d = os.environ.get(OUTPUT_ENV) or cfg["output"]["dir"]
    os.makedirs(d, exist_ok=True)
    return d


# ---------------------------------------------------------------------------
# shared builders

def _lattice(cfg):
    from .mass_shell import build_lattice

    return build_lattice(cfg["lattice"]["delta_k"], cfg["lattice"]["n_max"])


def _bcfg(cfg, lat=None):
    from .brackets import BracketConfig

    return BracketConfig(lat or _lattice(cfg), a=cfg["constants"]["a"], c=cfg["constants"]["c"])


def _check(name, anchor, value, tol, ok=None):
    value = float(value)
    return {"name": name, "paper_anchor": anchor, "value": value, "tolerance": tol,
            "pass": bool(value <= tol) if ok is None else bool(ok)}


def _system(cfg):
    from .dynamics import EvolutionConfig, PlaneWave, free_particle
    from .field_state import FieldState
    from .state import SystemState

    d, c = cfg["dynamics"], cfg["constants"]["c"]
    lat = _lattice(cfg)
    wave = None
    if d["wave"] is not None:
        w = d["wave"]
        wave = PlaneWave(w["amplitude"], w["k"], w.get("phase", 0.0))
    A0 = wave.potential(np.asarray(d["x"], float))[0] if wave else None
    part = free_particle(d["m0"], d["velocity"], d["x"], c, d["e"], A0)
    rng = np.random.default_rng(cfg["seed"])
    f = FieldState.zeros(lat, c, cfg["constants"]["a"])
    if d["field_scale"]:
        f = f.with_amp(d["field_scale"] * (rng.normal(size=f.amp.shape) + 1j * rng.normal(size=f.amp.shape)))
    ev = EvolutionConfig(d["dt"], d["steps"], "rk4", wave, d["coupling"], d["source"], d["clock"],
                         cfg["constants"]["a"], c)
    return SystemState(part, f), ev


# ---------------------------------------------------------------------------
# suites

def suite_brackets(cfg) -> list[dict]:
    from . import brackets as B
    from . import observables as O

    lat = _lattice(cfg)
    bc = _bcfg(cfg, lat)
    rng = np.random.default_rng(cfg["seed"])
    st = O.random_state(rng, lat, 1.0, bc.c, bc.a)
    x = rng.normal(size=4)
    n = len(lat)
    err_amp = err_qpi = 0.0
    for j in range(n):
        for mu in range(4):
            want = bc.a * lat.k0[j] ** 2 * B.METRIC_SIGNS[mu] / lat.w[j]
            got = B.bracket_amp(O.amp(j, mu), O.amp_conj(j, mu), st, bc)
            err_amp = max(err_amp, abs(got - want) / abs(want))
            for lam in range(4):
                want = bc.a * lat.k0[j] * lat.k_lower[j, lam] * B.METRIC_SIGNS[mu] / lat.w[j]
                got = B.bracket_qpi(O.q_obs(lat, j, mu, x, bc.c), O.pi_obs(lat, j, lam, mu, x, bc.c), st, bc)
                if want == 0:
                    err_qpi = max(err_qpi, abs(got) / (bc.a * lat.k0[j] ** 2 / lat.w[j]))
                else:
                    err_qpi = max(err_qpi, abs(got - want) / abs(want))
    anti = resid = 0.0
    for _ in range(20):
        A = O.random_polynomial(rng, n)
        Bo = O.random_polynomial(rng, n)
        ab = B.bracket_qpi_report(A, Bo, st, bc)
        ba = B.bracket_qpi(Bo, A, st, bc)
        anti = max(anti, abs(ab.value + ba) / max(abs(ab.value), 1e-300))
        resid = max(resid, ab.consistency_residual)
    return [
        _check("amplitude_pair_bracket", "amplitude pair bracket", err_amp, 1e-12),
        _check("canonical_pair_bracket", "q-pi pair bracket", err_qpi, 1e-12),
        _check("antisymmetry", "bracket axioms", anti, 1e-11),
        _check("qpi_path_consistency", "q-pi vs amplitude form", resid, 1e-10),
    ]


def suite_gupta_bleuler(cfg) -> list[dict]:
    from . import gupta_bleuler as G
    from . import observables as O

    lat = _lattice(cfg)
    bc = _bcfg(cfg, lat)
    rng = np.random.default_rng(cfg["seed"] + 1)
    st = O.random_state(rng, lat, 1.0, bc.c, bc.a)
    worst = 0.0
    for _ in range(10):
        A = G.random_compatible_observable(rng, lat)
        Bo = G.random_compatible_observable(rng, lat)
        worst = max(worst, max(G.reduction_chain(A, Bo, st, bc)["links"].values()))
    ratio = max(abs(G.pair_bracket_ratio(lat, bc, j) / (2 * lat.k0[j]) - 1) for j in range(len(lat)))
    # {b, b*} in units of the coincidence-weighted lattice delta rho_j / dk^3
    norm = 0.0
    for j in range(len(lat)):
        b = O.amplitude_3d_obs(lat, j, 1)
        v = G.bracket_standard(b, b.conjugate(), st, bc)
        norm = max(norm, abs(v.real * lat.delta_k ** 3 / G.coincidence_weight(lat)[j] + 1.0))
    return [
        _check("reduction_chain", "polarization reduction chain", worst, 1e-12),
        _check("pair_ratio_2k0", "4D/3D amplitude pair ratio", ratio, 1e-12),
        _check("standard_normalization", "two-polarization bracket normalization (a = 4)", norm, 1e-12),
    ]


def suite_pauli_jordan(cfg) -> list[dict]:
    from . import brackets as B
    from .minkowski import rotation

    lat = _lattice(cfg)
    rng = np.random.default_rng(cfg["seed"] + 2)
    x = rng.normal(size=4)
    d = B.pauli_jordan_lattice(x, lat)
    anti = abs(d + B.pauli_jordan_lattice(-x, lat)) / max(abs(d), 1e-300)
    eq_time = abs(B.pauli_jordan_lattice(np.r_[0.0, x[1:]], lat))
    g = B.pauli_jordan_grad(x, lat)
    h = 1e-5
    fd = np.array([(B.pauli_jordan_lattice(x + h * e, lat) - B.pauli_jordan_lattice(x - h * e, lat)) / (2 * h)
                   for e in np.eye(4)])
    grad_err = np.max(np.abs(fd - g)) / np.max(np.abs(g))
    rot = B.boost_invariance_check(x, rotation("z", math.pi / 2), lat)["deviation"]
    return [
        _check("odd_at_origin", "Pauli-Jordan function", abs(B.pauli_jordan_lattice(np.zeros(4), lat)), 1e-15),
        _check("antisymmetry", "Pauli-Jordan function", anti, 1e-12),
        _check("equal_time_zero", "Pauli-Jordan function", eq_time, 1e-12),
        _check("gradient_vs_fd", "Pauli-Jordan gradient", grad_err, 1e-7),
        _check("rotation_invariance", "manifest covariance", rot, 1e-12),
    ]


def suite_dynamics(cfg) -> list[dict]:
    from . import dynamics as D
    from .field_state import FieldState
    from .state import SystemState

    lat = _lattice(cfg)
    c = cfg["constants"]["c"]
    part = D.free_particle(1.0, (0.3, -0.1, 0.2), (0.0, 0.5, 0.0, -0.5), c)
    st = SystemState(part, FieldState.zeros(lat, c))
    ev = D.EvolutionConfig(0.05, 100, c=c)
    tr = D.integrate(st, ev, record=False)
    T = ev.duration
    v = np.array([c, 0.3, -0.1, 0.2])
    want = part.x + v * T
    err = np.max(np.abs(tr.final.particle.x - want)) / np.max(np.abs(want))
    wave = D.PlaneWave([0.0, 0.2, 0.0, 0.0], [1.0, 0.0, 0.0, 1.0])
    p2 = D.free_particle(1.0, (0.1, 0.0, 0.0), c=c, e=1.0, A=wave.potential(np.zeros(4))[0])
    tr2 = D.integrate(SystemState(p2, FieldState.zeros(lat, c)), D.EvolutionConfig(0.05, 400, external_wave=wave, c=c))
    sym = D.symplectic_deviation(st, D.EvolutionConfig(0.1, 10, c=c))
    return [
        _check("free_particle_line", "free particle", err, 1e-12),
        _check("mass_shell_drift", "mass shell", tr2.diagnostics["mass_shell_drift"], 1e-8),
        _check("particle_symplectic", "evolved x, p bracket equals the metric", sym, 1e-10),
    ]


SUITE_FUNCS = {"brackets": suite_brackets, "gupta-bleuler": suite_gupta_bleuler,
               "pauli-jordan": suite_pauli_jordan, "dynamics": suite_dynamics}


# ---------------------------------------------------------------------------
# commands

def cmd_verify(cfg, args) -> int:
    names = list(cfg["suites"])
    if args.parallel:
        with ThreadPoolExecutor() as ex:
            results = list(ex.map(lambda n: SUITE_FUNCS[n](cfg), names))
    else:
        results = [SUITE_FUNCS[n](cfg) for n in names]
    report = {"checks": [dict(chk, suite=n) for n, r in zip(names, results) for chk in r]}
    report["pass"] = all(c["pass"] for c in report["checks"])
    _emit(cfg, "verify.json", report)
    return 0 if report["pass"] else 1


def cmd_pauli_jordan(cfg, args) -> int:
    from . import brackets as B
    from .mass_shell import build_lattice

    pj = cfg["pauli_jordan"]
    lat = _lattice(cfg)
    x0s = np.linspace(*pj["x0"][:2], pj["x0"][2])
    rs = np.linspace(*pj["r"][:2], pj["r"][2])

    def rows(lattice):
        out = []
        for t in x0s:
            for r in rs:
                x = np.array([t, r, 0.0, 0.0])
                out.append((t, r, B.pauli_jordan_lattice(x, lattice), B.pauli_jordan_grad(x, lattice)[0]))
        return out

    data = rows(lat)
    buf = io.StringIO()
    buf.write("#schema=1\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["x0", "r", "delta_lat", "d0_delta_lat"])
    for row in data:
        wr.writerow([repr(float(v)) for v in row])
    path = os.path.join(output_dir(cfg), "pauli_jordan.csv")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
    summary = {"csv": path, "rows": len(data), "paper_anchor": "Pauli-Jordan function"}
    if pj["refine"] or args.refine:
        fine = build_lattice(lat.delta_k, 2 * lat.n_max)
        fdata = rows(fine)
        summary["refined_n_max"] = fine.n_max
        summary["max_row_change"] = float(max(abs(a[2] - b[2]) for a, b in zip(data, fdata)))
    print(json.dumps(summary))
    return 0


def cmd_bracket_table(cfg, args) -> int:
    from . import brackets as B
    from . import observables as O
    from .field_state import FieldState

    lat = _lattice(cfg)
    bc = _bcfg(cfg, lat)
    st = FieldState.zeros(lat, bc.c, bc.a)
    rows = []
    for j in range(len(lat)):
        for mu in range(4):
            v = B.bracket_amp(O.amp(j, mu), O.amp_conj(j, mu), st, bc)
            rows.append({"j": j, "k": lat.k[j].tolist(), "w": float(lat.w[j]), "mu": mu,
                         "value": [v.real, v.imag], "paper_anchor": "amplitude pair bracket"})
    _emit(cfg, "bracket_table.json", {"rows": rows})
    return 0


def cmd_reduce(cfg, args) -> int:
    from . import gupta_bleuler as G
    from . import observables as O

    lat = _lattice(cfg)
    bc = _bcfg(cfg, lat)
    rng = np.random.default_rng(cfg["seed"])
    st = O.random_state(rng, lat, 1.0, bc.c, bc.a)
    A = G.random_compatible_observable(rng, lat)
    Bo = G.random_compatible_observable(rng, lat)
    ch = G.reduction_chain(A, Bo, st, bc)
    report = {"values": {k: [v.real, v.imag] for k, v in ch["values"].items()},
              "links": ch["links"], "paper_anchor": "polarization reduction chain"}
    report["pass"] = all(v < 1e-12 for v in ch["links"].values())
    _emit(cfg, "reduce.json", report)
    return 0 if report["pass"] else 1


def cmd_boost_check(cfg, args) -> int:
    from . import brackets as B
    from .mass_shell import build_lattice
    from .minkowski import boost

    b = cfg["boost"]
    lam = boost(b["axis"], b["rapidity"])
    study = []
    for n in b["n_max"]:
        r = B.boost_invariance_check(np.asarray(b["x"], float), lam, build_lattice(cfg["lattice"]["delta_k"], n))
        study.append(dict(r, n_max=n))
    devs = [s["deviation"] for s in study]
    monotone = all(b_ < a_ for a_, b_ in zip(devs, devs[1:]))
    _emit(cfg, "boost_check.json", {"study": study, "monotone": monotone, "paper_anchor": "manifest covariance"})
    return 0 if monotone else 1


def cmd_evolve(cfg, args) -> int:
    from . import dynamics as D

    st, ev = _system(cfg)
    try:
        tr = D.integrate(st, ev)
    except D.IntegrationError as exc:
        print(json.dumps({"error": str(exc), "step": exc.step}))
        return 1
    out = output_dir(cfg)
    path = os.path.join(out, "trajectory.csv")
    with open(path, "w") as fh:
        fh.write(tr.to_csv())
    summary = {"csv": path, "steps": ev.steps, "mass_shell_drift": tr.diagnostics["mass_shell_drift"],
               "paper_anchor": "particle dynamics"}
    if cfg["dynamics"]["symplectic"] or args.symplectic:
        summary["symplectic"] = D.symplectic_check(st, ev, cfg["dynamics"]["fd_step"]).tolist()
    _emit(cfg, "evolve.json", summary)
    return 0


def cmd_symplectic_check(cfg, args) -> int:
    from . import dynamics as D

    st, ev = _system(cfg)
    try:
        m = D.symplectic_check(st, ev, cfg["dynamics"]["fd_step"])
    except (D.IntegrationError, D.TangentMapError) as exc:
        print(json.dumps({"error": str(exc)}))
        return 1
    dev = float(np.max(np.abs(m - np.diag([1.0, -1.0, -1.0, -1.0]))))
    _emit(cfg, "symplectic.json", {"matrix": m.tolist(), "deviation": dev,
                                   "paper_anchor": "evolved x, p bracket equals the metric"})
    return 0


def _emit(cfg, name, doc):
    text = json.dumps(doc, indent=2, sort_keys=True)
    with open(os.path.join(output_dir(cfg), name), "w") as fh:
        fh.write(text + "\n")
    print(text)


COMMANDS = {"verify": cmd_verify, "pauli-jordan": cmd_pauli_jordan, "bracket-table": cmd_bracket_table,
            "reduce": cmd_reduce, "boost-check": cmd_boost_check, "evolve": cmd_evolve,
            "symplectic-check": cmd_symplectic_check}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="covbracket", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a scalar config field, dotted path (repeatable)")
    ap.add_argument("--parallel", action="store_true", help="run verify suites concurrently")
    ap.add_argument("--refine", action="store_true", help="pauli-jordan: also evaluate at doubled n_max")
    ap.add_argument("--symplectic", action="store_true", help="evolve: add the symplectic-check matrix")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args.config, args.set)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return COMMANDS[args.command](cfg, args)


if __name__ == "__main__":
    sys.exit(main())
