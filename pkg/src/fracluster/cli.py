"""``fracluster`` command line: cone angles, minimization runs, s-sweeps, curvature and energies.

Configurations are JSON objects.  Command-line flags override the matching
keys, unknown keys are rejected with the line where they appear, and every
output carries the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .cones import classical_weighted_angles, f_alpha, solve_weighted_cone, stationarity_residual
from .curvature import CurvatureQuery, fractional_curvature
from .energy import Cluster, cluster_energy, extrapolate_to_one
from .geometry import (
    ExteriorDatum,
    Sector,
    build_grid,
    datum_from_dict,
    halfplane_datum,
    region_from_dict,
    steiner_exterior_datum,
    steiner_halfplane_datum,
)
from .io import EXTERIOR_OFFSET, read_label_image, write_csv, write_json, write_label_image
from .kernel import FractionalParameter, build_interaction_matrix
from .minimizer import SolverConfig, minimize_dirichlet, rasterize, symmetric_difference_area

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2

DEFAULTS = {
    "s": 0.9,
    "weights": None,
    "grid": {"box": [[-1.0, -1.0], [1.0, 1.0]], "n": 64},
    "domain": {"type": "disk", "center": [0.0, 0.0], "radius": 1.0},
    "datum": "steiner",
    "schedule": "greedy",
    "T0": 0.0,
    "cooling": 0.9,
    "anneal_sweeps": 50,
    "seed": 0,
    "max_sweeps": 500,
    "restarts": 8,
    "init": "nearest",
    "quad_tol": 1e-10,
    "pad": 4,
    "far_order": 2,
    "far_gauss": 10,
    "s_values": [0.6, 0.8, 0.95],
    "exclude_radius": 0.2,
    "density_radii": None,
    "name": "run",
    "out": ".",
}
GRID_KEYS = {"box", "n"}


class ConfigError(ValueError):
    """Invalid configuration, with the 1-based line where the offending key sits."""

    def __init__(self, msg: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + msg)


def _key_line(text: str | None, path: list[str]) -> int | None:
    """Line of the last key of ``path``, found by following the keys in order through the text."""
    if not text:
        return None
    pos = 0
    for key in path:
        m = re.compile(r'"' + re.escape(key) + r'"\s*:').search(text, pos)
        if m is None:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


@dataclass
class RunConfig:
    """A resolved, validated configuration plus the objects built from it."""

    values: dict
    ext: ExteriorDatum
    source: str = "<config>"

    def resolved(self) -> dict:
        return json.loads(json.dumps(self.values))


def _bundled(name: str) -> Path | None:
    ref = resources.files("fracluster") / "configs" / (name if name.endswith(".json") else name + ".json")
    return Path(str(ref)) if ref.is_file() else None


def load_config_text(where: str | None) -> tuple[dict, str | None, str]:
    """Raw dictionary, source text and a display name for ``--config`` (a path or a bundled name)."""
    if where is None:
        return {}, None, "<defaults>"
    path = Path(where)
    if not path.is_file():
        bundled = _bundled(where)
        if bundled is None:
            raise ConfigError(f"no such config file or bundled config: {where}", source=where)
        path = bundled
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON: {e.msg} (column {e.colno})", e.lineno, str(path)) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object", 1, str(path))
    return raw, text, str(path)


def _datum(value, k_hint):
    if value == "steiner":
        return steiner_exterior_datum()
    if value == "steiner_halfplane":
        return steiner_halfplane_datum()
    if isinstance(value, dict) and value.get("type") == "halfplane_split":
        return halfplane_datum(tuple(value.get("normal", (1.0, 0.0))), float(value.get("offset", 0.0)))
    if isinstance(value, dict) and "phases" in value:
        return datum_from_dict(value)
    raise ValueError("datum must be 'steiner', 'steiner_halfplane', a halfplane_split object or a phases object")


def resolve_config(raw: dict, overrides: dict, text: str | None = None, source: str = "<config>") -> RunConfig:
    """Merge defaults, file values and flag overrides, then validate."""
    for key in raw:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}", _key_line(text, [key]), source)
    grid = raw.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("grid must be an object", _key_line(text, ["grid"]), source)
    for key in grid:
        if key not in GRID_KEYS:
            raise ConfigError(f"unknown key {key!r} in grid", _key_line(text, ["grid", key]), source)
    values = json.loads(json.dumps(DEFAULTS))
    values.update(raw)
    values["grid"] = {**DEFAULTS["grid"], **grid}
    for key, val in overrides.items():
        if val is None:
            continue
        if key == "n":
            values["grid"]["n"] = val
        else:
            values[key] = val

    def fail(key, msg, path=None):
        line = _key_line(text, path or [key]) if key in raw or path else None
        raise ConfigError(f"{key}: {msg}", line, source)

    try:
        ext = _datum(values["datum"], None)
    except (ValueError, KeyError, TypeError) as e:
        fail("datum", str(e))
    if values["weights"] is None:
        values["weights"] = [1.0] * ext.k
    checks = [
        ("s", lambda v: isinstance(v, (int, float)) and 0 < v < 1, "must be a number in (0, 1)"),
        ("weights", lambda v: isinstance(v, list) and len(v) == ext.k and all(isinstance(c, (int, float)) and c > 0 for c in v), f"must be {ext.k} positive numbers"),
        ("schedule", lambda v: v in ("greedy", "anneal"), "must be 'greedy' or 'anneal'"),
        ("T0", lambda v: isinstance(v, (int, float)) and v >= 0, "must be >= 0"),
        ("cooling", lambda v: isinstance(v, (int, float)) and 0 < v < 1, "must lie in (0, 1)"),
        ("anneal_sweeps", lambda v: isinstance(v, int) and v >= 0, "must be a nonnegative integer"),
        ("seed", lambda v: isinstance(v, int) and v >= 0, "must be a nonnegative integer"),
        ("max_sweeps", lambda v: isinstance(v, int) and v >= 1, "must be an integer >= 1"),
        ("restarts", lambda v: isinstance(v, int) and v >= 1, "must be an integer >= 1"),
        ("init", lambda v: v in ("nearest", "random"), "must be 'nearest' or 'random'"),
        ("quad_tol", lambda v: isinstance(v, (int, float)) and v > 0, "must be positive"),
        ("pad", lambda v: isinstance(v, int) and v >= 1, "must be an integer >= 1"),
        ("far_order", lambda v: isinstance(v, int) and v >= 1, "must be an integer >= 1"),
        ("far_gauss", lambda v: isinstance(v, int) and v >= 1, "must be an integer >= 1"),
        ("s_values", lambda v: isinstance(v, list) and v and all(isinstance(x, (int, float)) and 0 < x < 1 for x in v), "must be a nonempty list of numbers in (0, 1)"),
        ("exclude_radius", lambda v: isinstance(v, (int, float)) and v >= 0, "must be >= 0"),
        ("density_radii", lambda v: v is None or (isinstance(v, list) and all(isinstance(x, (int, float)) and x > 0 for x in v)), "must be null or a list of positive radii"),
        ("name", lambda v: isinstance(v, str) and v and "/" not in v, "must be a nonempty file stem"),
        ("out", lambda v: isinstance(v, str), "must be a path"),
    ]
    for key, ok, msg in checks:
        if not ok(values[key]):
            fail(key, msg)
    g = values["grid"]
    if not (isinstance(g["n"], int) and g["n"] >= 2):
        fail("n", "must be an integer >= 2", ["grid", "n"])
    try:
        (x0, y0), (x1, y1) = g["box"]
        if not (x1 > x0 and y1 > y0):
            raise ValueError
    except (TypeError, ValueError):
        fail("box", "must be [[x0, y0], [x1, y1]] with x1 > x0, y1 > y0", ["grid", "box"])
    try:
        region_from_dict(values["domain"])
    except (ValueError, KeyError, TypeError) as e:
        fail("domain", f"invalid region: {e}")
    return RunConfig(values, ext, source)


def build_problem(cfg: RunConfig, s: float | None = None):
    v = cfg.values
    omega = region_from_dict(v["domain"])
    g = build_grid(v["grid"]["box"], v["grid"]["n"], omega)
    solver = SolverConfig(
        v["s"] if s is None else s,
        tuple(v["weights"]),
        g,
        cfg.ext,
        schedule=v["schedule"],
        T0=v["T0"],
        cooling=v["cooling"],
        anneal_sweeps=v["anneal_sweeps"],
        seed=v["seed"],
        max_sweeps=v["max_sweeps"],
        restarts=v["restarts"],
        init=v["init"],
        quad_tol=v["quad_tol"],
    )
    W = build_interaction_matrix(g, cfg.ext, solver.param(), pad=v["pad"], far_order=v["far_order"], far_gauss=v["far_gauss"])
    return g, solver, W


def _radii(cfg: RunConfig, g):
    r = cfg.values["density_radii"]
    return [4 * g.h, 8 * g.h] if r is None else r


# ---------------------------------------------------------------------------
# commands


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}", source="<flags>") from None


def _emit_csv(header, rows, out, config) -> None:
    if out:
        write_csv(out, header, rows)
        write_json(str(out) + ".json", {"config": config})
    buf = io.StringIO()
    buf.write("# config " + json.dumps(config, sort_keys=True) + "\n")
    csv.writer(buf, lineterminator="\n").writerows([header, *rows])
    sys.stdout.write(buf.getvalue())


def cmd_cone_angles(args) -> int:
    s_list = _floats(args.s or "0.5")
    c = _floats(args.weights or "1,1,1")
    if len(c) != 3 or any(not x > 0 for x in c) or any(not 0 < s < 1 for s in s_list):
        raise ConfigError("need three positive weights and s in (0, 1)", source="<flags>")
    rows = []
    for s in s_list:
        a = solve_weighted_cone(c, s)
        rows.append([s, *c, *a.alpha, *stationarity_residual(a, c, s)])
    header = ["s", "c1", "c2", "c3", "alpha1", "alpha2", "alpha3", "res12", "res23", "res31"]
    _emit_csv(header, rows, args.out, {"command": "cone-angles", "s": s_list, "weights": c})
    return EXIT_OK


def cmd_classical_angles(args) -> int:
    c = _floats(args.weights or "1,1,1")
    if len(c) != 3 or any(not x > 0 for x in c):
        raise ConfigError("need three positive weights", source="<flags>")
    a = classical_weighted_angles(c)
    _emit_csv(["c1", "c2", "c3", "alpha1", "alpha2", "alpha3"], [[*c, *a.alpha]], args.out, {"command": "classical-angles", "weights": c})
    return EXIT_OK


def _overrides(args) -> dict:
    o = {
        "s": None,
        "weights": _floats(args.weights) if args.weights else None,
        "n": args.grid,
        "seed": args.seed,
        "out": args.out,
    }
    if args.s:
        vals = _floats(args.s)
        if args.command == "gamma-sweep":
            o["s_values"] = vals
        elif len(vals) == 1:
            o["s"] = vals[0]
        else:
            raise ConfigError("--s takes a single value for this command", source="<flags>")
    return o


def _resolve(args) -> RunConfig:
    raw, text, source = load_config_text(args.config)
    return resolve_config(raw, _overrides(args), text, source)


def cmd_minimize(args) -> int:
    cfg = _resolve(args)
    g, solver, W = build_problem(cfg)
    rep = minimize_dirichlet(solver, W, radii=_radii(cfg, g))
    out = Path(cfg.values["out"])
    stem = cfg.values["name"]
    write_label_image(out / f"{stem}.pgm", rep.cluster)
    write_csv(out / f"{stem}_trace.csv", ["step", "energy"], list(enumerate(rep.trace)))
    write_json(out / f"{stem}.json", {"config": cfg.resolved(), "version": __version__, "report": rep.to_dict()})
    j = rep.junction
    summary = {
        "energy": rep.energy.total,
        "scaled": rep.energy.scaled,
        "junctions": 0 if j is None else len(j.junctions),
        "angles_deg": None if j is None or j.angles is None else {k: math.degrees(a) for k, a in j.angles.items()},
        "outputs": [str(out / f"{stem}{suf}") for suf in (".pgm", ".json", "_trace.csv")],
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_gamma_sweep(args) -> int:
    cfg = _resolve(args)
    v = cfg.values
    rows = []
    for s in v["s_values"]:
        row = {"s": s, "energy": None, "scaled": None, "junctions": None, "angles_deg": None, "angle_error_deg": None, "symdiff": None, "error": ""}
        try:
            g, solver, W = build_problem(cfg, s)
            rep = minimize_dirichlet(solver, W, radii=_radii(cfg, g))
            ref = rasterize(g, cfg.ext)
            row.update(energy=rep.energy.total, scaled=rep.energy.scaled)
            if (ref[g.omega_mask] >= 0).all():
                row["symdiff"] = symmetric_difference_area(rep.cluster, ref, v["exclude_radius"])
            j = rep.junction
            if j is not None:
                row["junctions"] = len(j.junctions)
                if j.angles is not None:
                    deg = [math.degrees(a) for a in j.angles.values()]
                    row["angles_deg"] = deg
                    row["angle_error_deg"] = max(abs(d - 120.0) for d in deg) if cfg.ext.k == 3 else None
        except Exception as e:  # a failed s value is recorded and the sweep goes on
            row["error"] = f"{type(e).__name__}: {e}"
        rows.append(row)

    def non_increasing(key):
        seq = [r[key] for r in rows if r[key] is not None]
        return None if len(seq) < 2 else all(b <= a + 1e-12 for a, b in zip(seq, seq[1:]))

    ok = [r for r in rows if r["scaled"] is not None]
    summary = {
        "symdiff_non_increasing": non_increasing("symdiff"),
        "angle_error_non_increasing": non_increasing("angle_error_deg"),
        "scaled_extrapolated": extrapolate_to_one([r["s"] for r in ok], [r["scaled"] for r in ok]) if len(ok) >= 3 else None,
    }
    out = Path(v["out"])
    stem = v["name"]
    header = ["s", "energy", "scaled", "junctions", "angles_deg", "angle_error_deg", "symdiff", "error"]
    write_csv(out / f"{stem}_sweep.csv", header, [[r[k] if k != "angles_deg" or r[k] is None else ";".join(f"{a:.4f}" for a in r[k]) for k in header] for r in rows])
    write_json(out / f"{stem}_sweep.json", {"config": cfg.resolved(), "rows": rows, "summary": summary})
    print(json.dumps({"rows": rows, "summary": summary}, indent=2))
    return EXIT_OK


def cmd_curvature(args) -> int:
    s_list = _floats(args.s or "0.5")
    if len(s_list) != 1 or not 0 < s_list[0] < 1:
        raise ConfigError("--s must be a single value in (0, 1)", source="<flags>")
    s = s_list[0]
    if (args.region is None) == (args.sector is None):
        raise ConfigError("give exactly one of --region or --sector", source="<flags>")
    if args.sector is not None:
        if not 0 < args.sector < 2 * math.pi:
            raise ConfigError("--sector opening must lie in (0, 2 pi)", source="<flags>")
        region = Sector((0.0, 0.0), 0.0, args.sector)
        region_desc = {"type": "sector", "vertex": [0.0, 0.0], "start": 0.0, "end": args.sector}
    else:
        try:
            text = Path(args.region).read_text() if Path(args.region).is_file() else args.region
            region_desc = json.loads(text)
            region = region_from_dict(region_desc)
        except (ValueError, KeyError, TypeError) as e:
            raise ConfigError(f"invalid region: {e}", source="--region") from None
    points = [tuple(_floats(p)) for p in (args.point or ["1,0"])]
    if any(len(p) != 2 for p in points):
        raise ConfigError("--point takes x,y", source="<flags>")
    results = []
    for x in points:
        r = fractional_curvature(CurvatureQuery(x, region=region, r_cut=args.r_cut), s, tol=args.tol)
        results.append({"x": list(x), "phase": None, "H_s": r.value, "error_bar": r.error_bar})
    out = {"config": {"command": "curvature", "s": s, "region": region_desc, "points": [list(p) for p in points], "r_cut": args.r_cut, "tol": args.tol}, "results": results}
    if args.f_check:
        if args.sector is None:
            raise ConfigError("--f-check needs --sector", source="<flags>")
        a = args.sector
        ref = f_alpha(math.pi - a, s) if a < math.pi else -f_alpha(a - math.pi, s) if a > math.pi else 0.0
        h = fractional_curvature(CurvatureQuery((1.0, 0.0), region=region), s, tol=args.tol).value
        out["f_check"] = {"H_s_at_unit_point": h, "F_pi_minus_alpha": ref, "difference": h - ref}
    if args.out:
        write_json(args.out, out)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_energy(args) -> int:
    cfg = _resolve(args)
    v = cfg.values
    omega = region_from_dict(v["domain"])
    g = build_grid(v["grid"]["box"], v["grid"]["n"], omega)
    if args.labels:
        img, _ = read_label_image(args.labels)
        if img.shape != (g.ny, g.nx):
            raise ConfigError(f"label image is {img.shape[1]}x{img.shape[0]}, grid is {g.nx}x{g.ny}", source=args.labels)
        lab = img[::-1].T.astype(np.int64)
        lab[lab >= EXTERIOR_OFFSET] = -1
        lab[~g.omega_mask] = -1
        source = args.labels
    else:
        lab = rasterize(g, cfg.ext)
        source = "datum extended into the domain"
    cl = Cluster(g, lab, cfg.ext)
    p = FractionalParameter(v["s"], quad_tol=v["quad_tol"])
    W = build_interaction_matrix(g, cfg.ext, p, pad=v["pad"], far_order=v["far_order"], far_gauss=v["far_gauss"])
    e = cluster_energy(cl, v["weights"], p, W)
    out = {"config": cfg.resolved(), "labels": source, "energy": e.to_dict()}
    if args.labels is None and v["out"] not in (None, "."):
        write_json(Path(v["out"]) / f"{v['name']}_energy.json", out)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracluster", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        p.add_argument("--s", help="fractional exponent (comma list where a sweep is meant)")
        p.add_argument("--weights", help="comma-separated phase weights")
        p.add_argument("--out", help="output file or directory")
        if config:
            p.add_argument("--config", help="JSON config file or bundled name (steiner3, twophase)")
            p.add_argument("--grid", type=int, help="cells across the grid box")
            p.add_argument("--seed", type=int, help="random seed")

    p = sub.add_parser("cone-angles", help="stationary weighted three-phase cone")
    common(p, config=False)
    p.set_defaults(func=cmd_cone_angles)
    p = sub.add_parser("classical-angles", help="angles of the classical weighted triple junction")
    common(p, config=False)
    p.set_defaults(func=cmd_classical_angles)
    p = sub.add_parser("minimize", help="solve the discrete Dirichlet problem")
    common(p)
    p.set_defaults(func=cmd_minimize)
    p = sub.add_parser("gamma-sweep", help="minimize over a list of s values")
    common(p)
    p.set_defaults(func=cmd_gamma_sweep)
    p = sub.add_parser("energy", help="energy of a label image or of the datum extended inside")
    common(p)
    p.add_argument("--labels", help="label image written by minimize")
    p.set_defaults(func=cmd_energy)
    p = sub.add_parser("curvature", help="fractional curvature at boundary points of a region")
    common(p, config=False)
    p.add_argument("--region", help="region as JSON text or a JSON file")
    p.add_argument("--sector", type=float, help="sector {0 <= arg < ALPHA} with vertex at the origin")
    p.add_argument("--point", action="append", help="boundary point x,y (repeatable)")
    p.add_argument("--r-cut", type=float, default=math.inf, dest="r_cut")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--f-check", action="store_true", help="compare with F(pi - alpha) at (1, 0)")
    p.set_defaults(func=cmd_curvature)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, IndexError, ArithmeticError, MemoryError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
