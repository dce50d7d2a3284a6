"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 singular-front halt,
3 compatibility failure.
"""

import argparse
import hashlib
import json
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy

from . import __version__
from .compatibility import check_c1, check_c2
from .core import (
    EPS_V,
    QUAD_RTOL,
    R_MIN,
    ROOT_TOL,
    EMFieldValue,
    LightFrontError,
    ResolutionError,
    SingularFrontError,
    Units,
)
from .kinematics import Branch
from .propagation import (
    SHELL_BAND,
    evaluate_field,
    field_grid_rows,
    initial_shells,
    net_shell_coefficient,
    propagate_free_field,
    write_field_grid,
)
from .scenarios import (
    ConfigError,
    free_field_from_spec,
    load_config,
    paper_example_to_si,
    preset_config,
    run_dynamics,
    scenario_coulomb_front,
    scenario_paper_example,
    scenario_two_body,
)

EXIT_OK, EXIT_CONFIG, EXIT_FRONT, EXIT_INCOMPATIBLE = 0, 1, 2, 3


def _read_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON in {path}: {exc}") from None


def _config_hash(doc):
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def write_manifest(out_dir, command, doc, outputs):
    manifest = {
        "command": command,
        "config_sha256": _config_hash(doc),
        "versions": {"lightfront": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "tolerances": {"root": ROOT_TOL, "quadrature_rtol": QUAD_RTOL, "velocity_guard": EPS_V,
                       "r_min": R_MIN, "shell_band": SHELL_BAND},
        "outputs": sorted(outputs),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _grid_points(doc):
    grid = doc.get("grid")
    if grid is None:
        raise ConfigError("grid", "missing required key")
    if "points" in grid:
        pts = np.asarray(grid["points"], dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ConfigError("grid.points", "expected a list of 3-vectors")
        return pts
    if "box" in grid:
        box = grid["box"]
        try:
            lo, hi = np.asarray(box["min"], float), np.asarray(box["max"], float)
            shape = [int(n) for n in box["shape"]]
        except (KeyError, TypeError, ValueError):
            raise ConfigError("grid.box", "needs min, max and shape") from None
        axes = [np.linspace(a, b, n) for a, b, n in zip(lo, hi, shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 3)
    raise ConfigError("grid", "needs either points or box")


def _times(doc):
    times = doc.get("times", [doc["time"]] if "time" in doc else None)
    if times is None:
        raise ConfigError("times", "missing required key")
    return [float(t) for t in times]


def _chunks(n, k):
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _si_rows(rows):
    u = Units.si()
    out = []
    for r in rows:
        t = float(u.from_natural(r[0], "time"))
        E = u.from_natural(r[4:7], "efield").tolist()
        B = u.from_natural(r[7:10], "bfield").tolist()
        out.append([t, *r[1:4], *E, *B, *r[10:]])
    return out


def cmd_evaluate_field(args):
    doc = _read_config(args.config)
    cfg = load_config(doc, args.units)
    pts = _grid_points(doc)
    times = _times(doc)
    if args.units == "si" or cfg.units.mode == "si":
        times = [float(Units.si().to_natural(t, "time")) for t in times]
    charges = cfg.system.charges

    def evaluate(sl, t):
        total = EMFieldValue.zeros((sl.stop - sl.start,))
        region = None
        count = np.zeros(sl.stop - sl.start, dtype=int)
        for c, traj, ini in zip(charges, cfg.trajectories, cfg.inits):
            s = evaluate_field(traj, ini, pts[sl], t)
            total = total + c.charge * s.regular
            region = s.region if region is None else region
            count += s.shell_count
        return total, region, count

    rows = []
    try:
        for t in times:
            parts = _chunks(len(pts), max(1, args.threads))
            with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
                results = list(pool.map(lambda sl: evaluate(sl, t), parts))
            E = np.concatenate([r[0].E for r in results])
            B = np.concatenate([r[0].B for r in results])
            region = np.concatenate([r[1] for r in results])
            count = np.concatenate([r[2] for r in results])
            rows += field_grid_rows(t, pts, EMFieldValue(E, B), region, count)
    except SingularFrontError as exc:
        event = exc.to_dict()
        _emit_event(args, event)
        return EXIT_FRONT
    if args.units == "si" or cfg.units.mode == "si":
        rows = _si_rows(rows)
    _write_rows(args, rows, doc, "evaluate-field")
    return EXIT_OK


def _emit_event(args, event):
    text = json.dumps(event, sort_keys=True)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "events.json"), "w") as fh:
            fh.write(text + "\n")


def _write_rows(args, rows, doc, command):
    ext = "csv" if args.format == "csv" else "jsonl"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        name = f"field.{ext}"
        write_field_grid(os.path.join(args.out, name), rows, args.format)
        write_manifest(args.out, command, doc, [name])
    else:
        write_field_grid("/dev/stdout", rows, args.format)


def write_simulation(out_dir, histories, events, doc, command, units=None):
    os.makedirs(out_dir, exist_ok=True)
    names = []
    for i, h in enumerate(histories):
        name = f"trajectory_{i}.csv"
        if units is not None and not units.is_natural:
            from .kinematics import TrajectoryHistory
            h = TrajectoryHistory(units.from_natural(h.t, "time"), h.q,
                                  units.from_natural(h.p, "momentum"), h.a, check=False,
                                  mass=h.mass)
        h.to_csv(os.path.join(out_dir, name))
        names.append(name)
    with open(os.path.join(out_dir, "events.json"), "w") as fh:
        json.dump(events, fh, indent=2, sort_keys=True)
        fh.write("\n")
    names.append("events.json")
    write_manifest(out_dir, command, doc, names)


def _run_events(result):
    if hasattr(result, "events_dict"):
        return result.events_dict()
    return {"halted": False, "reason": "converged", "convergence": result.to_dict()}


def cmd_simulate(args):
    doc = _read_config(args.config)
    cfg = load_config(doc, args.units)
    result = run_dynamics(cfg)
    events = _run_events(result)
    units = cfg.units if (args.units or doc.get("units", "natural")) == "si" else None
    write_simulation(args.out or ".", result.histories, events, doc, "simulate", units)
    return EXIT_FRONT if events.get("reason") == "singular_front" else EXIT_OK


def check_report(cfg, order, t_probe=1.0, seed=0):
    rng = np.random.default_rng(seed)
    charges = []
    ok = True
    for i, (traj, ini) in enumerate(zip(cfg.trajectories, cfg.inits)):
        c1 = check_c1(traj, ini)
        try:
            c2 = check_c2(traj, ini, order)
            c2d = c2.to_dict()
            passed = c2.passed
        except ResolutionError as exc:
            c2d = {"error": str(exc)}
            passed = False
        dirs = rng.normal(size=(12, 3))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        shells = initial_shells(traj, ini, t_probe)
        net = net_shell_coefficient(shells, traj.position(0.0) + t_probe * dirs).as_array()
        charges.append({
            "charge": i, "c1": c1.to_dict(), "c2": c2d,
            "shells": {"probe_time": t_probe, "branch": Branch.for_time(t_probe).name.lower(),
                       "max_net_coefficient": float(np.max(np.abs(net))),
                       "records": [s.to_dict() for s in shells]},
            "compatible": bool(c1.passed and passed),
        })
        ok &= c1.passed and passed
    return {"order": order, "compatible": bool(ok), "charges": charges}


CHECK_SCHEMA = {
    "type": "object",
    "required": ["order", "compatible", "charges"],
    "properties": {
        "order": {"type": "integer", "minimum": 0},
        "compatible": {"type": "boolean"},
        "charges": {"type": "array", "items": {
            "type": "object",
            "required": ["charge", "c1", "c2", "shells", "compatible"],
            "properties": {
                "c1": {"type": "object", "required": ["pass", "momentum_gap", "position_gap"]},
                "shells": {"type": "object", "required": ["max_net_coefficient", "records"]},
            },
        }},
    },
}


def cmd_check(args):
    doc = _read_config(args.config)
    cfg = load_config(doc, args.units)
    order = args.order if args.order is not None else int(doc.get("check", {}).get("order", 0))
    report = check_report(cfg, order)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "check.json"), "w") as fh:
            fh.write(text + "\n")
        write_manifest(args.out, "check", doc, ["check.json"])
    print(text)
    return EXIT_OK if report["compatible"] else EXIT_INCOMPATIBLE


def cmd_propagate_free(args):
    doc = _read_config(args.config)
    free = free_field_from_spec(doc.get("free"), "free")
    pts = _grid_points(doc)
    rows = []
    for t in _times(doc):
        rows += field_grid_rows(t, pts, propagate_free_field(free, pts, t))
    _write_rows(args, rows, doc, "propagate-free")
    return EXIT_OK


_TWO_BODY = {
    "retarded-line": ("RetardedLine", "kicked"),
    "retarded-line-compatible": ("RetardedLine", "compatible"),
    "retarded-line-adapted": ("RetardedLine", "adapted"),
    "retarded-line-smeared": ("RetardedLine", "smeared"),
    "fst-window": ("FSTWindow", "compatible"),
}


def cmd_scenario(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    name = args.name
    if name in _TWO_BODY:
        preset, variant = _TWO_BODY[name]
        res = scenario_two_body(preset, variant)
        events = res.events()
        write_simulation(out, res.histories, events, preset_config(preset, variant), f"scenario {name}")
        return EXIT_FRONT if events.get("reason") == "singular_front" else EXIT_OK
    if name == "paper-example":
        rep = scenario_paper_example("si")
        nat = scenario_paper_example("natural")
        body = {"si": rep.to_dict(), "natural": nat.to_dict(),
                "natural_as_si": paper_example_to_si(nat).to_dict()}
        with open(os.path.join(out, "report.json"), "w") as fh:
            json.dump(body, fh, indent=2, sort_keys=True)
            fh.write("\n")
        write_manifest(out, f"scenario {name}", {"scenario": name}, ["report.json"])
        print(json.dumps(body, sort_keys=True))
        return EXIT_OK
    if name == "coulomb-front":
        ds = scenario_coulomb_front()
        ext = "csv" if args.format == "csv" else "jsonl"
        write_field_grid(os.path.join(out, f"field.{ext}"), ds.rows, args.format)
        with open(os.path.join(out, "shells.json"), "w") as fh:
            json.dump(ds.shell_report(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        write_manifest(out, f"scenario {name}", {"scenario": name}, [f"field.{ext}", "shells.json"])
        return EXIT_OK
    raise ConfigError("scenario", f"unknown scenario {name!r}")


SCENARIO_NAMES = sorted(list(_TWO_BODY) + ["paper-example", "coulomb-front"])


def build_parser():
    parser = argparse.ArgumentParser(prog="lightfront", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration document")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--units", choices=("natural", "si"), default=None)
    common.add_argument("--threads", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (
        ("evaluate-field", cmd_evaluate_field, True),
        ("simulate", cmd_simulate, True),
        ("check", cmd_check, True),
        ("propagate-free", cmd_propagate_free, True),
    ):
        p = sub.add_parser(name, parents=[common])
        p.set_defaults(func=fn, needs_config=needs_config)
        if name == "check":
            p.add_argument("--order", type=int, default=None)
    p = sub.add_parser("scenario", parents=[common])
    p.add_argument("name", choices=SCENARIO_NAMES)
    p.set_defaults(func=cmd_scenario, needs_config=False)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.needs_config and not args.config:
        print("config error: --config: missing required option", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularFrontError as exc:
        _emit_event(args, exc.to_dict())
        return EXIT_FRONT
    except LightFrontError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
