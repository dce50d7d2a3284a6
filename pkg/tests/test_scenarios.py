import copy

import numpy as np
import pytest

import lightfront.lw_fields as lw
import lightfront.scenarios as sc
from lightfront.core import DomainError, Units
from lightfront.kinematics import TrajectoryHistory, circular_worldline
from lightfront.propagation import GaussianPulse, PlaneWave, Region, ZeroField

BASE = {
    "units": "natural",
    "lambda": 1.0,
    "horizon": 0.5,
    "integrator": {"method": "rk4", "step": 0.05},
    "charges": [
        {"m": 1.0, "e": 1.0, "q0": [0, 0, 0], "p0": [0, 0, 0],
         "initial_field": {"aux": {"kind": "static"}, "free": {"kind": "zero"}}},
        {"m": 2.0, "e": -1.0, "q0": [1, 0, 0], "p0": [0, 0.1, 0],
         "initial_field": {"aux": {"kind": "inertial"}}},
    ],
}


def broken(edit):
    doc = copy.deepcopy(BASE)
    edit(doc)
    return doc


@pytest.mark.parametrize("edit, key", [
    (lambda d: d.pop("charges"), "charges"),
    (lambda d: d.update(charges=[]), "charges"),
    (lambda d: d["charges"][0].pop("q0"), "charges[0].q0"),
    (lambda d: d["charges"][1].update(p0=[0, 1]), "charges[1].p0"),
    (lambda d: d["charges"][0].update(m=-1), "charges[0].m"),
    (lambda d: d["charges"][0].update(e="lots"), "charges[0].e"),
    (lambda d: d["charges"][0].pop("initial_field"), "charges[0].initial_field"),
    (lambda d: d["charges"][0]["initial_field"]["aux"].update(kind="teleport"),
     "charges[0].initial_field.aux.kind"),
    (lambda d: d["charges"][0]["initial_field"].update(**{"lambda": 2}), "charges[0].initial_field.lambda"),
    (lambda d: d["charges"][1]["initial_field"].update(free={"kind": "plane_wave", "k": [1, 0, 0]}),
     "charges[1].initial_field.free.polarization"),
    (lambda d: d.update(coupling=[[1, 1], [1, 0]]), "coupling"),
    (lambda d: d.update(coupling=[[0, 1, 1]]), "coupling"),
    (lambda d: d.update(units="imperial"), "units"),
    (lambda d: d["integrator"].update(method="euler"), "integrator.method"),
    (lambda d: d["integrator"].update(step=0), "integrator.step"),
    (lambda d: d.update(horizon=float("inf")), "horizon"),
    (lambda d: d.update(self_force="magic"), "self_force"),
    (lambda d: d.update(mollifier={"radius": -1}), "mollifier.radius"),
])
def test_config_errors_name_the_key(edit, key):
    with pytest.raises(sc.ConfigError) as info:
        sc.load_config(broken(edit))
    assert info.value.key == key
    assert str(info.value).startswith(key)
    assert isinstance(info.value, ValueError)


def test_load_config_builds_system():
    cfg = sc.load_config(BASE)
    sys_ = cfg.system
    assert sys_.n == 2 and sys_.lam == 1.0 and sys_.step == 0.05 and cfg.method == "rk4"
    assert np.array_equal(sys_.coupling.e, [[0, 1], [1, 0]])
    assert np.all(cfg.inits[0].aux.velocity(-3.0) == 0)
    assert np.allclose(cfg.inits[1].aux.momentum(-3.0), [0, 0.1, 0])
    assert cfg.system.charges[1].mass == 2.0
    mixed = broken(lambda d: d.update(**{"lambda": 0.5}))
    with pytest.raises(sc.ConfigError, match="integrator.method"):
        sc.load_config(mixed)
    mixed["integrator"].pop("method")
    assert sc.load_config(mixed).method == "relaxation"


def test_worldline_kinds(tmp_path):
    q0, p0 = np.array([0.1, 0, 0]), np.array([0, 0.2, 0])
    path = tmp_path / "hist.csv"
    TrajectoryHistory.sample(circular_worldline(0.1, 1.0, center=[0, 0, 0]), np.linspace(0, 1, 11)).to_csv(path)
    specs = [
        {"kind": "static"}, {"kind": "frozen"}, {"kind": "inertial"}, {"kind": "inertial", "p": [0.3, 0, 0]},
        {"kind": "hyperbolic", "accel": [0.1, 0, 0]},
        {"kind": "oscillating", "amplitude": [0.1, 0, 0], "omega": 1.0},
        {"kind": "gaussian_polynomial", "coeffs": [[0, 0.2, 0]], "width": 1.0},
        {"kind": "csv", "path": str(path)},
    ]
    for spec in specs:
        w = sc.worldline_from_spec(spec, q0, p0, 1.0, "aux")
        assert w.position(0.0).shape == (3,)
    assert np.allclose(sc.worldline_from_spec({"kind": "inertial"}, q0, p0, 1.0, "aux").momentum(0.0), p0)
    with pytest.raises(sc.ConfigError) as info:
        sc.worldline_from_spec({"kind": "csv", "path": str(tmp_path / "nope.csv")}, q0, p0, 1.0, "aux")
    assert info.value.key == "aux"
    with pytest.raises(sc.ConfigError) as info:
        sc.worldline_from_spec({"kind": "oscillating", "amplitude": [2, 0, 0], "omega": 1}, q0, p0, 1.0, "aux")
    assert info.value.key == "aux"


def test_free_field_kinds():
    assert isinstance(sc.free_field_from_spec(None, "f"), ZeroField)
    assert isinstance(sc.free_field_from_spec({"kind": "plane_wave", "k": [0, 0, 1], "polarization": [1, 0, 0]},
                                              "f"), PlaneWave)
    pulse = sc.free_field_from_spec({"kind": "gaussian_pulse", "center": [0, 0, 0], "width": 0.5,
                                     "direction": [0, 0, 1], "polarization": [0, 1, 0]}, "f")
    assert isinstance(pulse, GaussianPulse)
    with pytest.raises(sc.ConfigError, match="f.kind"):
        sc.free_field_from_spec({"kind": "laser"}, "f")


def test_si_config_is_converted():
    u = Units.si()
    doc = {"units": "si", "horizon": 1e-9, "integrator": {"step": 1e-11},
           "charges": [{"m": u.m_electron, "e": u.e_charge, "q0": [0, 0, 0], "p0": [1e-24, 0, 0],
                        "initial_field": {"aux": {"kind": "inertial"}}}]}
    cfg = sc.load_config(doc)
    assert cfg.horizon == pytest.approx(float(u.to_natural(1e-9, "time")), rel=1e-15)
    assert cfg.system.step == pytest.approx(float(u.to_natural(1e-11, "time")), rel=1e-15)
    c = cfg.system.charges[0]
    assert c.mass == pytest.approx(float(u.to_natural(u.m_electron, "mass")), rel=1e-15)
    assert c.charge == pytest.approx(float(u.to_natural(u.e_charge, "charge")), rel=1e-15)
    assert c.p0[0] == pytest.approx(float(u.to_natural(1e-24, "momentum")), rel=1e-15)
    # the document itself is left in SI
    assert doc["horizon"] == 1e-9
    assert sc.load_config(dict(doc, units="natural"), units="si").horizon == cfg.horizon


def test_coulomb_front_regions_and_shells():
    ds = sc.scenario_coulomb_front(p0=(0.3, 0, 0), t=1.0, n=41)
    d = np.linalg.norm(ds.points, axis=-1)
    region = ds.sample.region
    assert np.all(region[d < 1 - 1e-6] == Region.INSIDE_CONE)
    assert np.all(region[d > 1 + 1e-6] == Region.OUTSIDE_CONE)
    # lattice points at distance 1: the axes and the (0.6, 0.8) family
    assert np.count_nonzero(region == Region.ON_CONE_BAND) == np.count_nonzero(np.abs(d - 1) <= 1e-9) == 12
    v = 0.3 / np.hypot(0.3, 1)
    n = ds.shell_points
    # hand formula at r = t = 1: (n - v) / (1 - n.v) - n for E, n x v / (1 - n.v) for B
    denom = 1 - n[:, 0] * v
    E = (n - [v, 0, 0]) / denom[:, None] - n
    B = -np.cross(n, [v, 0, 0]) / denom[:, None]
    assert ds.shell_report()["max_net_coefficient"] == pytest.approx(
        np.max(np.abs(np.concatenate([E, B], -1))), rel=1e-12)
    assert sc.scenario_coulomb_front(p0=(0, 0, 0)).shell_report()["max_net_coefficient"] == 0.0
    assert len(ds.rows) == len(ds.points) and ds.rows[0][0] == 1.0


def test_paper_example_units_agree(monkeypatch):
    si = sc.scenario_paper_example("si")
    nat = sc.paper_example_to_si(sc.scenario_paper_example("natural"))
    for k in ("E1x", "a2", "P2", "rise_time"):
        assert getattr(nat, k) == pytest.approx(getattr(si, k), rel=1e-12)
    assert sc.paper_example_to_si(si) is si
    monkeypatch.setattr(lw, "textbook_larmor", True)
    assert sc.scenario_paper_example("si").P2 == pytest.approx(1.5 * si.P2, rel=1e-14)
    with pytest.raises(DomainError):
        sc.scenario_paper_example("cgs")
    bigger = sc.scenario_paper_example("si", params={"Z": 2e13})
    assert bigger.E1x == pytest.approx(2 * si.E1x, rel=1e-14)


def test_presets():
    for variant in ("compatible", "kicked", "smeared", "adapted"):
        cfg = sc.load_config(sc.preset_config("RetardedLine", variant))
        assert cfg.system.n == 2 and cfg.horizon == 3.0
    assert sc.load_config(sc.preset_config("RetardedLine", "smeared")).system.rho.radius == 0.05
    assert sc.load_config(sc.preset_config("FSTWindow")).method == "relaxation"
    with pytest.raises(DomainError):
        sc.preset_config("RetardedLine", "sideways")
    with pytest.raises(DomainError):
        sc.preset_config("ThreeBody")
    assert set(sc.SCENARIOS) == {"coulomb-front", "paper-example", "retarded-line",
                                 "retarded-line-compatible", "retarded-line-adapted",
                                 "retarded-line-smeared", "fst-window"}


def test_adapted_preset_runs_through():
    out = sc.scenario_two_body("RetardedLine", "adapted")
    ev = out.events()
    assert not ev["halted"] and ev["t_end"] == pytest.approx(3.0)
    assert ev["adaptation_trace"][-1] <= 1e-10
    assert all(not e.get("singular", False) for e in ev["events"] if isinstance(e, dict))


def test_fst_preset_converges():
    out = sc.scenario_two_body("FSTWindow")
    ev = out.events()
    assert ev["reason"] == "converged" and ev["convergence"]["converged"]
    assert ev["convergence"]["trace"][-1] < 1e-8
