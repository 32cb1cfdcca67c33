"""Batch front-end: ``momentkit <kind> --config cfg.json --out DIR``.

A config holds ``{"seed": int, "scenarios": [...]}``; each scenario names its
``kind`` (moment, weight, psi, flow, stability, filt, vortex).  The report
``report.json`` is a deterministic function of (config, seed); wall-clock data
goes to ``run.json``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from . import filtstab as fs
from . import kempfness as kn
from . import targets as tg
from . import vortexlat as vl
from .liecore import AnchorRep, expm, from_json_matrix, from_json_vector, random_skew, to_json_matrix

log = logging.getLogger("momentkit")

KINDS = ("moment", "weight", "psi", "flow", "stability", "filt", "vortex")


class ConfigError(ValueError):
    pass


_TARGET_FIELDS = {"type", "m", "group", "weights", "k", "tau", "ranks", "taus"}
_COMMON = {"name", "kind", "seed", "target", "point", "c"}
FIELDS = {
    "moment": _COMMON | {"generators"},
    "weight": _COMMON | {"generators", "samples", "t_max", "slope_tol"},
    "psi": _COMMON | {"g", "s", "ts", "quad_tol"},
    "flow": _COMMON | {"step", "max_iter", "tol", "budget"},
    "stability": _COMMON | {"step", "max_iter", "tol", "budget"},
    "filt": {"name", "kind", "seed", "R", "d", "ranks", "degrees", "taus", "subobjects", "deg_bound",
             "max_chain"},
    "vortex": {"name", "kind", "seed", "N", "L", "d", "c", "tol", "max_iter", "zero_section",
               "refinement", "dump"},
}
REQUIRED = {
    "moment": {"target"}, "weight": {"target"}, "psi": {"target"}, "flow": {"target"},
    "stability": {"target"}, "filt": {"R", "d"}, "vortex": {"N", "d", "c"},
}


@dataclass
class Scenario:
    kind: str
    name: str
    seed: int
    params: dict = field(default_factory=dict)


def validate(cfg: Any, seed: Optional[int] = None, only: Optional[str] = None) -> list[Scenario]:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(cfg) - {"seed", "scenarios"}
    if extra:
        raise ConfigError(f"unknown top-level fields: {sorted(extra)}")
    base = int(cfg.get("seed", 0) if seed is None else seed)
    raw = cfg.get("scenarios", [])
    if not isinstance(raw, list):
        raise ConfigError("'scenarios' must be a list")
    seeds = np.random.SeedSequence(base).generate_state(max(len(raw), 1))
    out = []
    for i, sc in enumerate(raw):
        if not isinstance(sc, dict) or "kind" not in sc:
            raise ConfigError(f"scenario {i}: object with a 'kind' is required")
        kind = sc["kind"]
        if kind not in KINDS:
            raise ConfigError(f"scenario {i}: unknown kind {kind!r}")
        if only is not None and kind != only:
            raise ConfigError(f"scenario {i}: kind {kind!r} does not match subcommand {only!r}")
        unknown = set(sc) - FIELDS[kind]
        if unknown:
            raise ConfigError(f"scenario {i}: unknown fields {sorted(unknown)}")
        missing = REQUIRED[kind] - set(sc)
        if missing:
            raise ConfigError(f"scenario {i}: missing fields {sorted(missing)}")
        if "target" in sc:
            bad = set(sc["target"]) - _TARGET_FIELDS
            if bad:
                raise ConfigError(f"scenario {i}: unknown target fields {sorted(bad)}")
            build_target(sc["target"])  # fail early
        params = {k: v for k, v in sc.items() if k not in ("kind", "name", "seed")}
        out.append(Scenario(kind, str(sc.get("name", f"{kind}-{i}")), int(sc.get("seed", seeds[i])), params))
    return out


def build_target(desc: dict):
    try:
        m = int(desc["m"])
        grp = desc.get("group", "U")
        weights = desc.get("weights")
        if weights is not None:
            grp = "torus"
        group = AnchorRep(m, grp, None if weights is None else tuple(map(tuple, weights)))
        kind = desc["type"]
    except KeyError as exc:
        raise ConfigError(f"target needs field {exc}") from None
    if kind == "linear":
        return tg.Linear(group)
    if kind == "projective":
        return tg.Projective(group, float(desc.get("tau", 1.0)))
    if kind == "grassmann":
        return tg.Grassmann(int(desc["k"]), group, float(desc.get("tau", 1.0)))
    if kind == "flag":
        return tg.Flag(tuple(desc["ranks"]), group, tuple(desc.get("taus", ())))
    raise ConfigError(f"unknown target type {kind!r}")


def _vec(x) -> list:
    x = np.asarray(x, complex)
    if x.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in x]
    return to_json_matrix(x)


def _point(target, params, rng):
    if "point" in params:
        if isinstance(target, (tg.Linear, tg.Projective)):
            return tg.make_point(target, from_json_vector(params["point"]))
        return tg.make_point(target, from_json_matrix(params["point"]))
    return tg.random_point(target, rng)


def _generators(target, params, rng, default: int):
    if "generators" in params:
        return [from_json_matrix(s) for s in params["generators"]]
    n = int(params.get("samples", default))
    return [tg.project_algebra(target.group, random_skew(target.dim, rng)) for _ in range(n)]


def _center(params):
    return None if "c" not in params else from_json_matrix(params["c"])


def _weight_json(w: tg.ExtendedWeight) -> dict:
    return {"value": None if w.is_infinite else w.value, "status": w.status, "error": w.error}


def _flow_opts(p) -> kn.FlowOptions:
    d = kn.FlowOptions()
    return kn.FlowOptions(step=float(p.get("step", d.step)), max_iter=int(p.get("max_iter", d.max_iter)),
                          tol=float(p.get("tol", d.tol)), budget=float(p.get("budget", d.budget)))


# -- runners; each returns (result dict, {filename: rows or bytes}) ------------


def run_moment(sc: Scenario, rng):
    t = build_target(sc.params["target"])
    x = _point(t, sc.params, rng)
    rows = [{"index": i, "moment_pair": tg.moment_pair(t, x, s)}
            for i, s in enumerate(_generators(t, sc.params, rng, 3))]
    return {"point": _vec(x), "moment_element": to_json_matrix(tg.moment_element(t, x)), "pairs": rows}, {}


def run_weight(sc: Scenario, rng):
    t = build_target(sc.params["target"])
    x = _point(t, sc.params, rng)
    c = _center(sc.params)
    rows = []
    for i, s in enumerate(_generators(t, sc.params, rng, 3)):
        closed = tg.maximal_weight(t, x, s, c)
        num = tg.numeric_maximal_weight(t, x, s, float(sc.params.get("t_max", 50.0)),
                                        float(sc.params.get("slope_tol", 1e-8)), c=c)
        rows.append({"index": i, "closed_form": _weight_json(closed), "numeric": _weight_json(num)})
    return {"point": _vec(x), "weights": rows}, {}


def run_psi(sc: Scenario, rng):
    p = sc.params
    t = build_target(p["target"])
    x = _point(t, p, rng)
    c = _center(p)
    qt = float(p.get("quad_tol", 1e-9))
    files = {}
    if "g" in p:
        g = from_json_matrix(p["g"])
    else:
        s = from_json_matrix(p["s"]) if "s" in p else tg.project_algebra(t.group, random_skew(t.dim, rng))
        g = expm(1j * s)
    rec = kn.psi(t, x, g, qt, c)
    out = {"point": _vec(x), "value": rec.value, "error": rec.error, "converged": rec.converged,
           "generator": to_json_matrix(rec.s)}
    if "ts" in p:
        ts = [float(v) for v in p["ts"]]
        lam = tg.lambda_curve(t, x, rec.s, ts)
        shift = 0.0 if c is None else float(np.real(np.vdot(rec.s, c)))
        vals = kn.psi_along(t, x, rec.s, ts, qt, c)
        files[f"{sc.name}_curve.csv"] = [("t", "lambda_t", "psi")] + [
            (a, b - shift, v) for a, b, v in zip(ts, lam, vals)]
    return out, files


def _flow_json(res: kn.FlowResult) -> dict:
    return {"status": res.status, "residual": res.residual, "psi_value": res.psi_value,
            "iterations": res.iterations, "diagnostics": res.diagnostics,
            "witness": None if res.witness is None else to_json_matrix(res.witness),
            "g": to_json_matrix(res.g)}


def run_flow(sc: Scenario, rng):
    t = build_target(sc.params["target"])
    x = _point(t, sc.params, rng)
    res = kn.minimize_psi(t, x, _center(sc.params), _flow_opts(sc.params))
    trace = [("iter", "residual", "psi_value", "length_log")] + list(res.trace)
    return {"point": _vec(x), **_flow_json(res)}, {f"{sc.name}_trace.csv": trace}


def run_stability(sc: Scenario, rng):
    t = build_target(sc.params["target"])
    x = _point(t, sc.params, rng)
    v = kn.stability_test(t, x, _center(sc.params), _flow_opts(sc.params))
    out = {"point": _vec(x), "verdict": v.kind, "stage": v.diagnostics.get("stage"),
           "direction": None if v.s is None else to_json_matrix(v.s),
           "weight": None if v.weight is None else _weight_json(v.weight)}
    files = {}
    if v.minimizer is not None:
        out["flow"] = _flow_json(v.minimizer)
        files[f"{sc.name}_trace.csv"] = [("iter", "residual", "psi_value", "length_log")] + list(v.minimizer.trace)
    return out, files


def run_filt(sc: Scenario, rng):
    p = sc.params
    bundle = fs.BundleData(int(p["R"]), int(p["d"]))
    taus = [Fraction(str(t)) for t in p.get("taus", [])]
    filt = fs.SectionFiltration(tuple(p.get("ranks", ())), tuple(p.get("degrees", ())), tuple(taus))
    c = fs.central_c(bundle, filt)
    out: dict = {"c": fs.fmt(c), "bogomolov_residual": fs.fmt(fs.bogomolov_residual(bundle, filt))}
    if "subobjects" in p:
        subs = [fs.Subobject(int(s["rank"]), int(s["degree"]), tuple(s.get("meets", ()))) for s in p["subobjects"]]
        out["slope_tests"] = [{"rank": s.rank, "degree": s.degree, "meets": list(s.meets),
                               "slope": fs.fmt(fs.sub_slope(filt, s)), "verdict": fs.slope_test(bundle, filt, s)}
                              for s in subs]
        if len(subs) == 1:
            out["verdict"] = out["slope_tests"][0]["verdict"]
    rep = fs.equivalence_brute(bundle, filt, int(p.get("deg_bound", 3)), int(p.get("max_chain", 1)))
    coef, cz = fs.z_coefficient(bundle, filt)
    out["equivalence"] = {
        "equivalent": rep.equivalent, "grid_positive": rep.grid_positive, "slopes_pass": rep.slopes_pass,
        "n_subobjects": rep.n_subobjects, "n_grid_points": rep.n_grid_points,
        "n_destabilizing": len(rep.destabilizing), "n_counterexamples": len(rep.counterexamples),
        "coefficient_test": rep.coefficient_test,
    }
    out["z_coefficient"] = {"expression": str(coef), "vanishes_at": fs.fmt(cz)}
    out["no_solution_expected"] = fs.bogomolov_residual(bundle, filt) < 0
    return out, {}


def run_vortex(sc: Scenario, rng):
    p = sc.params
    lat = vl.TorusLattice(int(p["N"]), float(p.get("L", 1.0)))
    d, c = int(p["d"]), float(p["c"])
    d0 = vl.SolveOptions()
    opts = vl.SolveOptions(tol=float(p.get("tol", d0.tol)), max_iter=int(p.get("max_iter", d0.max_iter)),
                           seed=sc.seed % (2**32), zero_section=bool(p.get("zero_section", False)))
    res = vl.solve(lat, d, c, opts)
    out: dict = {"status": res.status, "reason": res.reason, "bound": res.bound, "residuals": res.residuals}
    files: dict = {}
    if res.conn is not None:
        br = vl.ymh(res.conn, res.phi, c)
        out["ymh"] = br.__dict__
        out["decomposition_residual"] = vl.decomposition_check(res.conn, res.phi, c)
        out["bogomolov_lattice"] = vl.bogomolov_lattice(res.conn, res.phi, c)
        out["flux"] = vl.total_flux(res.conn)
        if p.get("dump", False):
            files[f"{sc.name}_state"] = (res.conn, res.phi)
    if res.trace:
        keys = list(res.trace[0])
        files[f"{sc.name}_trace.csv"] = [tuple(keys)] + [tuple(r[k] for k in keys) for r in res.trace]
    if "refinement" in p:
        rows = [("N", "h", "decomposition_residual", "observed_order")]
        prev = None
        for n in p["refinement"]:
            sub = vl.TorusLattice(int(n), lat.L)
            conn, phi = vl.smooth_state(sub, d)
            r = vl.decomposition_check(conn, phi, c)
            rows.append((int(n), sub.h, r, "" if prev is None else float(np.log2(prev / r))))
            prev = r
        out["refinement"] = [dict(zip(rows[0], r)) for r in rows[1:]]
        files[f"{sc.name}_refinement.csv"] = rows
    return out, files


RUNNERS = {"moment": run_moment, "weight": run_weight, "psi": run_psi, "flow": run_flow,
           "stability": run_stability, "filt": run_filt, "vortex": run_vortex}


def _execute(sc: Scenario):
    rng = np.random.default_rng(sc.seed)
    try:
        result, files = RUNNERS[sc.kind](sc, rng)
        return {"name": sc.name, "kind": sc.kind, "seed": sc.seed, "ok": True, **result}, files
    except Exception as exc:  # reported per scenario, turned into a nonzero exit by main
        return {"name": sc.name, "kind": sc.kind, "seed": sc.seed, "ok": False,
                "error": {"type": type(exc).__name__, "message": str(exc)}}, {}


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, (Fraction, fs.Q)):
        return fs.fmt(o)
    if isinstance(o, float) and not np.isfinite(o):
        return str(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable, allow_nan=False) + "\n"


def _write_files(out: Path, files: dict):
    for name, payload in files.items():
        if name.endswith(".csv"):
            with open(out / name, "w", newline="") as fh:
                csv.writer(fh).writerows(payload)
        else:
            vl.save_state(out / name, *payload)


def run(cfg: dict, out: Path, seed: Optional[int] = None, jobs: int = 1, only: Optional[str] = None) -> int:
    scenarios = validate(cfg, seed, only)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    if jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_execute, scenarios))  # map keeps input order
    else:
        results = [_execute(sc) for sc in scenarios]
    for _, files in results:
        _write_files(out, files)
    digest = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()
    report = {"metadata": {"version": __version__, "config_sha256": digest,
                           "seed": int(cfg.get("seed", 0) if seed is None else seed)},
              "results": [r for r, _ in results]}
    (out / "report.json").write_text(dumps(report))
    (out / "run.json").write_text(dumps({"started": t0, "elapsed_s": time.time() - t0, "jobs": jobs}))
    return 0 if all(r["ok"] for r, _ in results) else 1


def _fail(out: Optional[Path], kind: str, message: str, code: int) -> int:
    err = {"error": {"type": kind, "message": message}}
    text = dumps(err)
    sys.stdout.write(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").write_text(text)
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="momentkit", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=KINDS + ("run",), help="scenario kind, or 'run' for mixed configs")
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(args.out, "ConfigError", str(exc), 2)
    try:
        return run(cfg, args.out, args.seed, max(1, args.jobs), None if args.command == "run" else args.command)
    except (ConfigError, ValueError) as exc:
        return _fail(args.out, "ConfigError", str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
