"""Configuration documents and canned experiments.

A configuration is a JSON-compatible dict::

    {"units": "natural", "lambda": 1.0, "coupling": "no_self_interaction",
     "self_force": "none", "mollifier": null,
     "integrator": {"method": "rk4", "step": 0.02},
     "horizon": 3.0,
     "charges": [{"m": 1, "e": 1, "q0": [...], "p0": [...],
                  "trajectory": {...},                # optional, for field evaluation
                  "initial_field": {"lambda": 1.0,
                                    "aux": {"kind": "inertial"},
                                    "free": {"kind": "zero"}}}]}

Worldline specs have a ``kind`` of static, frozen, inertial, hyperbolic,
oscillating, gaussian_polynomial or csv.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from .compatibility import adapt_system
from .core import CouplingMatrix, DomainError, LightFrontError, Mollifier, Units, as_vec
from .dynamics import ChargeSpec, SystemConfig, integrate_relaxation, integrate_retarded
from .kinematics import (
    Extension,
    TrajectoryHistory,
    gaussian_polynomial_worldline,
    hyperbolic_worldline,
    inertial_worldline,
    oscillating_worldline,
    static_worldline,
)
from .lw_fields import larmor_power
from .propagation import (
    GaussianPulse,
    InitialFieldSpec,
    PlaneWave,
    Region,
    ZeroField,
    evaluate_field,
    field_grid_rows,
    initial_shells,
    net_shell_coefficient,
)


class ConfigError(LightFrontError, ValueError):
    """Malformed configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _get(doc, key, path, default=KeyError):
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected an object")
    if key not in doc:
        if default is KeyError:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
        return default
    return doc[key]


def _vec(value, path):
    try:
        return as_vec(value, path)
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def _num(value, path):
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a number") from None
    if not np.isfinite(out):
        raise ConfigError(path, "must be finite")
    return out


def worldline_from_spec(spec, q0, p0, mass, path, units=None):
    """Build a worldline from its config spec; q0/p0 are the charge's initial data."""
    kind = _get(spec, "kind", path)
    try:
        if kind in ("static", "frozen"):
            return static_worldline(q0, mass)
        if kind == "inertial":
            p = _vec(spec["p"], f"{path}.p") if "p" in spec else p0
            return inertial_worldline(q0, p, mass)
        if kind == "hyperbolic":
            acc = _vec(_get(spec, "accel", path), f"{path}.accel")
            return hyperbolic_worldline(q0, acc, mass)
        if kind == "oscillating":
            return oscillating_worldline(
                q0, _vec(_get(spec, "amplitude", path), f"{path}.amplitude"),
                _num(_get(spec, "omega", path), f"{path}.omega"),
                _vec(spec.get("v0", [0, 0, 0]), f"{path}.v0"), mass,
                _num(spec.get("phase", 0.0), f"{path}.phase"))
        if kind == "gaussian_polynomial":
            return gaussian_polynomial_worldline(
                q0, np.asarray(_get(spec, "coeffs", path), dtype=float),
                _num(_get(spec, "width", path), f"{path}.width"), mass)
        if kind == "csv":
            return TrajectoryHistory.from_csv(_get(spec, "path", path), mass=mass,
                                              past=Extension("inertial"), future=Extension("inertial"))
    except ConfigError:
        raise
    except (LightFrontError, OSError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.kind", f"unknown worldline kind {kind!r}")


def free_field_from_spec(spec, path):
    if spec is None:
        return ZeroField()
    kind = _get(spec, "kind", path)
    try:
        if kind == "zero":
            return ZeroField()
        if kind == "plane_wave":
            return PlaneWave(_vec(_get(spec, "k", path), f"{path}.k"),
                             _vec(_get(spec, "polarization", path), f"{path}.polarization"),
                             _num(spec.get("amplitude", 1.0), f"{path}.amplitude"),
                             _num(spec.get("phase", 0.0), f"{path}.phase"))
        if kind == "gaussian_pulse":
            return GaussianPulse(_vec(_get(spec, "center", path), f"{path}.center"),
                                 _num(_get(spec, "width", path), f"{path}.width"),
                                 _vec(_get(spec, "direction", path), f"{path}.direction"),
                                 _vec(_get(spec, "polarization", path), f"{path}.polarization"),
                                 _num(spec.get("amplitude", 1.0), f"{path}.amplitude"))
    except ConfigError:
        raise
    except (LightFrontError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.kind", f"unknown free-field kind {kind!r}")


@dataclass
class RunConfig:
    """Parsed configuration: the dynamical system plus per-charge field data."""

    system: SystemConfig
    inits: list
    trajectories: list
    horizon: float
    method: str
    integrator: dict
    units: Units
    doc: dict = field(repr=False, default_factory=dict)


def _to_natural(doc):
    """Convert the SI quantities of a config document to natural units."""
    u = Units.si()
    out = copy.deepcopy(doc)
    for k in ("horizon",):
        if k in out:
            out[k] = float(u.to_natural(out[k], "time"))
    integ = out.get("integrator", {})
    if "step" in integ:
        integ["step"] = float(u.to_natural(integ["step"], "time"))
    if out.get("mollifier"):
        out["mollifier"]["radius"] = float(out["mollifier"]["radius"])
    for c in out.get("charges", []):
        if "m" in c:
            c["m"] = float(u.to_natural(c["m"], "mass"))
        if "e" in c:
            c["e"] = float(u.to_natural(c["e"], "charge"))
        if "p0" in c:
            c["p0"] = u.to_natural(c["p0"], "momentum").tolist()
    return out


def load_config(doc, units=None):
    """Parse and validate a configuration document (dict)."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    mode = units or doc.get("units", "natural")
    if mode not in ("natural", "si"):
        raise ConfigError("units", f"unknown unit system {mode!r}")
    work = _to_natural(doc) if mode == "si" else doc
    charges_doc = _get(work, "charges", "")
    if not isinstance(charges_doc, list) or not charges_doc:
        raise ConfigError("charges", "expected a non-empty list")
    lam = _num(work.get("lambda", 1.0), "lambda")
    charges, inits, trajs = [], [], []
    for i, c in enumerate(charges_doc):
        path = f"charges[{i}]"
        q0 = _vec(_get(c, "q0", path), f"{path}.q0")
        p0 = _vec(_get(c, "p0", path), f"{path}.p0")
        m = _num(c.get("m", 1.0), f"{path}.m")
        e = _num(c.get("e", 1.0), f"{path}.e")
        if not m > 0:
            raise ConfigError(f"{path}.m", "mass must be positive")
        ini = _get(c, "initial_field", path)
        ipath = f"{path}.initial_field"
        aux = worldline_from_spec(_get(ini, "aux", ipath), q0, p0, m, f"{ipath}.aux")
        free = free_field_from_spec(ini.get("free"), f"{ipath}.free")
        ilam = _num(ini.get("lambda", lam), f"{ipath}.lambda")
        try:
            inits.append(InitialFieldSpec(ilam, aux, free))
        except ValueError as exc:
            raise ConfigError(f"{ipath}.lambda", str(exc)) from None
        ext = free_field_from_spec(c["external"], f"{path}.external") if "external" in c else None
        charges.append(ChargeSpec(q0, p0, m, e, aux=aux, free=free, external=ext))
        if "trajectory" in c:
            trajs.append(worldline_from_spec(c["trajectory"], q0, p0, m, f"{path}.trajectory"))
        else:
            trajs.append(inertial_worldline(q0, p0, m))
    coupling = work.get("coupling", "no_self_interaction")
    if coupling == "no_self_interaction":
        coupling = CouplingMatrix.no_self_interaction(len(charges))
    else:
        try:
            coupling = CouplingMatrix(np.asarray(coupling, dtype=float))
        except (DomainError, ValueError, TypeError) as exc:
            raise ConfigError("coupling", str(exc)) from None
    rho = None
    if work.get("mollifier"):
        md = work["mollifier"]
        try:
            rho = Mollifier(_num(_get(md, "radius", "mollifier"), "mollifier.radius"),
                            n_radial=int(md.get("n_radial", 48)),
                            sphere_degree=int(md.get("sphere_degree", 17)))
        except DomainError as exc:
            raise ConfigError("mollifier.radius", str(exc)) from None
    integ = dict(work.get("integrator", {}))
    method = integ.get("method", "rk4" if lam == 1.0 else "relaxation")
    if method not in ("rk4", "relaxation"):
        raise ConfigError("integrator.method", f"unknown method {method!r}")
    if method == "rk4" and lam != 1.0:
        raise ConfigError("integrator.method", "rk4 marching needs lambda = 1; use relaxation")
    try:
        system = SystemConfig(tuple(charges), coupling, lam, rho,
                              work.get("self_force", "none"),
                              _num(integ.get("step", 1e-3), "integrator.step"))
    except DomainError as exc:
        key = str(exc).split(":")[0]
        raise ConfigError(key, str(exc)) from None
    horizon = _num(work.get("horizon", 1.0), "horizon")
    return RunConfig(system, inits, trajs, horizon, method, integ,
                     Units(mode), doc)


def run_dynamics(cfg):
    """Integrate a parsed configuration with the configured method."""
    sys_ = cfg.system
    if cfg.method == "rk4":
        return integrate_retarded(sys_, cfg.horizon)
    return integrate_relaxation(sys_, cfg.horizon, tol=float(cfg.integrator.get("tol", 1e-8)),
                                max_iter=int(cfg.integrator.get("max_iter", 50)))


# ---------------------------------------------------------------------------
# Coulomb front


@dataclass
class CoulombFrontDataset:
    t: float
    points: np.ndarray
    sample: object
    shell_points: np.ndarray
    shell_coefficients: np.ndarray
    shells: list

    @property
    def rows(self):
        return field_grid_rows(self.t, self.points, self.sample.regular,
                               self.sample.region, self.sample.shell_count)

    def shell_report(self):
        return {"time": self.t, "radius": abs(self.t),
                "shells": [s.to_dict() for s in self.shells],
                "max_net_coefficient": float(np.max(np.abs(self.shell_coefficients)))}


def scenario_coulomb_front(p0=(0.3, 0.0, 0.0), t=1.0, trajectory=None, extent=2.0, n=41, n_shell=64):
    """Field of a charge released from a Coulomb initial state, on a z = 0 slice.

    The grid covers the inside of the cone (Lienard-Wiechert field of the
    actual motion), the outside (the unchanged Coulomb field) and the band
    on the cone, where the shell coefficients are reported on ``n_shell``
    points of the circle |x| = |t|.
    """
    q0 = np.zeros(3)
    actual = trajectory or inertial_worldline(q0, p0)
    init = InitialFieldSpec(1.0, static_worldline(actual.position(0.0), actual.mass))
    xs = np.linspace(-extent, extent, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], -1)
    # both worldlines are singular at their instantaneous positions
    keep = np.ones(len(pts), dtype=bool)
    for traj in (actual, init.aux):
        keep &= np.linalg.norm(pts - traj.position(t), axis=-1) > 1e-6
    pts = pts[keep]
    sample = evaluate_field(actual, init, pts, t, strict=False)
    phi = 2 * np.pi * np.arange(n_shell) / n_shell
    ring = actual.position(0.0) + abs(t) * np.stack([np.cos(phi), np.sin(phi), 0 * phi], -1)
    shells = initial_shells(actual, init, t)
    coef = net_shell_coefficient(shells, ring).as_array()
    return CoulombFrontDataset(t, pts, sample, ring, coef, shells)


# ---------------------------------------------------------------------------
# quantitative example

PAPER_EXAMPLE = {
    "Z": 1e13,              # electrons per charge
    "a1": 1e17,             # |a_1,0| in m/s^2
    "distance": 1e2,        # |q_2,t* - q_1,0| in m
    "diameter": 1e-2,       # diameter of rho in m
    "v2": 1e4,              # |v_2,0| in m/s
}


@dataclass(frozen=True)
class PaperExampleReport:
    E1x: float
    a2: float
    P2: float
    rise_time: float
    units: str

    def to_dict(self):
        return {"E1x": self.E1x, "a2": self.a2, "P2": self.P2,
                "rise_time": self.rise_time, "units": self.units}


def scenario_paper_example(units="si", params=None):
    """Order-of-magnitude estimate for a charge cluster hit by a front.

    A cluster of Z electrons with initial acceleration a1 sends a front that
    reaches a second cluster at distance d; its field there, the resulting
    acceleration, radiated power and the time the front needs to sweep
    over a smeared charge are computed.  With ``units="si"`` the arithmetic
    runs directly on SI quantities; with ``"natural"`` every input is first
    converted and the results stay in natural units.
    """
    prm = dict(PAPER_EXAMPLE, **(params or {}))
    u = Units.si()
    e, m = u.e_charge, u.m_electron
    Z = prm["Z"]
    if units == "si":
        E1x = Z * e / (4 * np.pi * u.epsilon0) * (-prm["a1"]) / (u.c**2 * prm["distance"])
        a2 = e / m * E1x
        P2 = larmor_power([a2, 0, 0], Z * e, units=u)
        dt = prm["diameter"] / prm["v2"]
        return PaperExampleReport(E1x, a2, P2, dt, "si")
    if units != "natural":
        raise DomainError(f"unknown unit system {units!r}")
    charge = float(u.to_natural(Z * e, "charge"))
    e_nat = float(u.to_natural(e, "charge"))
    m_nat = float(u.to_natural(m, "mass"))
    a1 = float(u.to_natural(prm["a1"], "acceleration"))
    v2 = float(u.to_natural(prm["v2"], "velocity"))
    E1x = charge * (-a1) / prm["distance"]
    a2 = e_nat / m_nat * E1x
    P2 = larmor_power([a2, 0, 0], charge)
    dt = prm["diameter"] / v2
    return PaperExampleReport(E1x, a2, P2, dt, "natural")


def paper_example_to_si(report):
    """Convert a natural-unit report to SI."""
    if report.units == "si":
        return report
    u = Units.si()
    return PaperExampleReport(float(u.from_natural(report.E1x, "efield")),
                              float(u.from_natural(report.a2, "acceleration")),
                              float(u.from_natural(report.P2, "power")),
                              float(u.from_natural(report.rise_time, "time")), "si")


# ---------------------------------------------------------------------------
# two-body presets


def _charge_doc(q0, p0, e, aux=None):
    return {"m": 1.0, "e": e, "q0": list(q0), "p0": list(p0),
            "initial_field": {"aux": aux or {"kind": "inertial"}, "free": {"kind": "zero"}}}


def preset_config(name, variant="compatible"):
    """Configuration document of a named preset.

    RetardedLine: two like charges (e = 1, m = 1) released from rest at
    x = -0.5 and x = +0.5 with retarded interaction (lambda = 1).  Variants:
    ``compatible`` (Coulomb initial field, no fronts), ``kicked`` (charge 1
    gets a sideways momentum 0.1 that its frozen initial field does not
    know about), ``smeared`` (kicked, with bump charge densities of radius
    0.05) and ``adapted`` (kicked, with the initial field spliced to fit).

    FSTWindow: the same geometry with half-retarded, half-advanced fields
    and weaker charges (e = 0.3), solved by waveform relaxation.
    """
    if name == "RetardedLine":
        kick = [0.0, 0.1, 0.0] if variant in ("kicked", "smeared", "adapted") else [0.0, 0.0, 0.0]
        doc = {"units": "natural", "lambda": 1.0, "coupling": "no_self_interaction",
               "self_force": "none", "mollifier": None,
               "integrator": {"method": "rk4", "step": 0.02}, "horizon": 3.0,
               "charges": [_charge_doc([-0.5, 0, 0], kick, 1.0, {"kind": "frozen"}),
                           _charge_doc([0.5, 0, 0], [0, 0, 0], 1.0, {"kind": "frozen"})]}
        if variant == "smeared":
            doc["mollifier"] = {"radius": 0.05, "n_radial": 8, "sphere_degree": 7}
        elif variant not in ("compatible", "kicked", "adapted"):
            raise DomainError(f"unknown RetardedLine variant {variant!r}")
        return doc
    if name == "FSTWindow":
        return {"units": "natural", "lambda": 0.5, "coupling": "no_self_interaction",
                "self_force": "none", "mollifier": None,
                "integrator": {"method": "relaxation", "step": 0.02, "tol": 1e-8, "max_iter": 50},
                "horizon": 1.0,
                "charges": [_charge_doc([-0.5, 0, 0], [0, 0, 0], 0.3, {"kind": "frozen"}),
                            _charge_doc([0.5, 0, 0], [0, 0, 0], 0.3, {"kind": "frozen"})]}
    raise DomainError(f"unknown two-body preset {name!r}")


@dataclass
class TwoBodyResult:
    preset: str
    variant: str
    config: RunConfig
    result: object
    adaptation: object = None

    @property
    def histories(self):
        return self.result.histories

    def events(self):
        if hasattr(self.result, "events_dict"):
            out = self.result.events_dict()
        else:
            out = {"halted": False, "reason": "converged", "convergence": self.result.to_dict()}
        if self.adaptation is not None:
            out["adaptation_trace"] = self.adaptation.trace
        return out


def scenario_two_body(preset="RetardedLine", variant="compatible", window=0.1):
    cfg = load_config(preset_config(preset, variant))
    if preset == "RetardedLine" and variant == "adapted":
        ad = adapt_system(cfg.system, window=window, order=1, preliminary=0.2)
        system = cfg.system.with_initial_fields(ad.inits)
        res = integrate_retarded(system, cfg.horizon)
        cfg.system = system
        return TwoBodyResult(preset, variant, cfg, res, ad)
    return TwoBodyResult(preset, variant, cfg, run_dynamics(cfg))


SCENARIOS = {
    "coulomb-front": scenario_coulomb_front,
    "paper-example": scenario_paper_example,
    "retarded-line": lambda: scenario_two_body("RetardedLine", "kicked"),
    "retarded-line-compatible": lambda: scenario_two_body("RetardedLine", "compatible"),
    "retarded-line-adapted": lambda: scenario_two_body("RetardedLine", "adapted"),
    "retarded-line-smeared": lambda: scenario_two_body("RetardedLine", "smeared"),
    "fst-window": lambda: scenario_two_body("FSTWindow"),
}
