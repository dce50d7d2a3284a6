import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import brentq

import lightfront.dynamics as dy
from lightfront.core import CouplingMatrix, DomainError, EMFieldValue, IterationError
from lightfront.kinematics import (
    TrajectoryHistory,
    hyperbolic_worldline,
    inertial_worldline,
    static_worldline,
)
from lightfront.lw_fields import coulomb_field
from lightfront.propagation import PlaneWave
from lightfront.scenarios import load_config, preset_config, scenario_two_body

from test_acceptance import crossing_sample


def two_charges(**kw):
    return (dy.ChargeSpec([-0.5, 0, 0], [0, 0, 0], charge=1.0),
            dy.ChargeSpec([0.5, 0, 0], [0, 0, 0], charge=-2.0))


def test_system_config_validation():
    charges = two_charges()
    with pytest.raises(DomainError, match="coupling: diagonal"):
        dy.SystemConfig(charges, coupling=CouplingMatrix.full(2))
    with pytest.raises(DomainError, match="coupling: expected"):
        dy.SystemConfig(charges, coupling=CouplingMatrix.no_self_interaction(3))
    with pytest.raises(DomainError, match="lambda"):
        dy.SystemConfig(charges, lam=1.2)
    with pytest.raises(DomainError, match="self_force"):
        dy.SystemConfig(charges, self_force="lorentz-dirac")
    with pytest.raises(DomainError, match="integrator.step"):
        dy.SystemConfig(charges, step=0.0)
    with pytest.raises(DomainError, match="charges"):
        dy.SystemConfig(())
    with pytest.raises(DomainError, match="mass"):
        dy.ChargeSpec([0, 0, 0], [0, 0, 0], mass=0.0)
    with pytest.raises(DomainError, match="lambda"):
        dy.integrate_retarded(dy.SystemConfig(charges, lam=0.5), 1.0)


def test_lorentz_force_static_and_magnetic():
    cfg = dy.SystemConfig(two_charges())
    q = np.array([c.q0 for c in cfg.charges])
    p = np.zeros((2, 3))
    sources = [lambda x, t, j=j: coulomb_field(q[j], x) for j in range(2)]
    F1 = dy.lorentz_force(1, 0.0, q, p, sources, cfg)
    # e1 e2 (q2 - q1) / |q2 - q1|^3 with e1 = 1, e2 = -2
    assert np.allclose(F1, [-2.0, 0, 0], rtol=1e-15)
    B = lambda x, t: EMFieldValue(np.zeros(3), np.array([0, 0, 0.5]))
    p = np.array([[0.0, 0, 0], [0.3, 0, 0]])
    F_mag = dy.lorentz_force(1, 0.0, q, p, [B, None], cfg)
    v = 0.3 / np.hypot(0.3, 1.0)
    assert np.allclose(F_mag, -2.0 * np.cross([v, 0, 0], [0, 0, 0.5]), rtol=1e-15)


@given(arrays(np.float64, 3, elements=st.floats(-3, 3)), arrays(np.float64, 3, elements=st.floats(-1, 1)),
       st.floats(0.2, 5))
def test_force_acceleration_round_trip(p, F, m):
    a = dy.acceleration_from_force(p, F, m)
    v = p / np.sqrt(p @ p + m * m)
    assert np.allclose(dy.momentum_rate(v, a, m), F, rtol=1e-10, atol=1e-12)


@pytest.fixture(scope="module")
def compatible_line():
    return scenario_two_body("RetardedLine", "compatible")


def test_compatible_line_conserves_coulomb_energy(compatible_line):
    """Before charge 1's initial cone arrives, charge 2 feels the Coulomb field of a fixed charge."""
    res = compatible_line.result
    assert not res.halted and res.reason == "horizon" and res.events == []
    h = res.histories[1]
    t = h.t[h.t <= 2.0]
    v = h.velocity(t)
    energy = 1 / np.sqrt(1 - np.sum(v * v, -1)) + 1 / np.linalg.norm(h.position(t) - [-0.5, 0, 0], axis=-1)
    assert np.max(np.abs(energy - energy[0])) < 1e-6
    # mirror symmetry of the two like charges
    h1 = res.histories[0]
    assert np.allclose(h1.q[:, 0], -h.q[:, 0], atol=1e-14)


def test_compatible_line_small_delay_residual(compatible_line):
    res = compatible_line.result
    cfg = compatible_line.config.system
    assert dy.eq32_residual(cfg, res.histories, points=np.linspace(0.05, 1.45, 8)) < 1e-6


def test_kicked_line_halts_at_singular_front():
    out = scenario_two_body("RetardedLine", "kicked")
    ev = out.events()
    assert ev["halted"] and ev["reason"] == "singular_front"
    crossing = [e for e in ev["events"] if e["event"] == "front_crossing"]
    assert len(crossing) == 1 and crossing[0]["charge"] == 1 and crossing[0]["source"] == 0
    t_star = crossing[0]["t_star"]
    assert t_star >= 1.0 and ev["t_end"] < t_star
    assert np.linalg.norm(np.array(crossing[0]["location"]) - [-0.5, 0, 0]) == pytest.approx(t_star, abs=1e-12)


def test_smeared_line_passes_the_front():
    out = scenario_two_body("RetardedLine", "smeared")
    ev = out.events()
    assert not ev["halted"] and ev["t_end"] == pytest.approx(3.0)
    h = out.histories[1]
    R = 0.05
    q1 = np.array([-0.5, 0, 0])
    # geometric oracle: the support ball touches the cone when d(t) - t = R, leaves it at -R
    g = lambda t, s: np.linalg.norm(h.position(t) - q1) - t - s * R
    t_in, t_out = brentq(g, 1, 2.9, args=(1,)), brentq(g, 1, 2.9, args=(-1,))
    t, ay = h.t, h.a[:, 1]
    assert np.all(np.abs(ay[t < t_in - h.t[1]]) < 1e-15)
    onset = t[np.argmax(np.abs(ay) > 1e-10)]
    assert t_in < onset <= t_in + 2 * h.t[1]
    peak = np.argmin(ay)
    j = peak + np.argmax(ay[peak:] >= 0)
    t_zero = t[j - 1] - ay[j - 1] * (t[j] - t[j - 1]) / (ay[j] - ay[j - 1])
    assert (t_zero - t_in) == pytest.approx(t_out - t_in, rel=0.15)


def test_crossing_closed_forms():
    q0 = np.zeros(3)
    ev = dy.detect_front_crossing([static_worldline([0, 1.5, 2.0])], [(0.0, q0)], horizon=10)
    assert ev[0].t_star == pytest.approx(2.5, abs=1e-13)
    v = 0.6
    rec = inertial_worldline([1.0, 0, 0], [v / np.sqrt(1 - v * v), 0, 0])
    assert dy.detect_front_crossing([rec], [(0.0, q0)], 10)[0].t_star == pytest.approx(1 / (1 - v), abs=1e-12)
    # general inertial partner: |D + v t| = t is a quadratic in t
    D, u = np.array([0.3, -1.2, 0.8]), np.array([-0.4, 0.5, 0.2])
    traj = inertial_worldline(D, u / np.sqrt(1 - u @ u))
    root = (D @ u + np.sqrt((D @ u) ** 2 + (1 - u @ u) * (D @ D))) / (1 - u @ u)
    assert dy.detect_front_crossing([traj], [(0.0, q0)], 50)[0].t_star == pytest.approx(root, abs=1e-12)
    assert dy.detect_front_crossing([traj], [(0.0, q0)], root / 2) == []


def test_crossing_matches_bisection_for_accelerated_partner():
    traj = hyperbolic_worldline([1.0, 0.5, 0], [-0.8, 0.3, 0.1])
    q0 = np.array([0.2, 0, 0.1])
    g = lambda t: np.linalg.norm(traj.position(t) - q0) - t
    lo, hi = 0.0, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if g(mid) > 0 else (lo, mid)
    assert dy.detect_front_crossing([traj], [(0.0, q0)], 50)[0].t_star == pytest.approx(lo, abs=1e-12)


def test_crossing_bounds_that_hold():
    """t* is at least the minimal distance to the source point, and d / (1 + v) with v < 1."""
    sample = crossing_sample()
    t_star, d0, dmin = sample.T
    assert len(sample) > 80
    assert np.all(t_star >= dmin - 1e-9)
    assert np.all(t_star >= d0 / 2)


def test_fst_relaxation_contracts():
    cfg = load_config(preset_config("FSTWindow"))
    res = dy.integrate_relaxation(cfg.system, cfg.horizon, tol=1e-10)
    assert res.converged and res.trace[-1] < 1e-10
    assert np.all(res.contraction_ratios < 0.5)
    # symmetric pair
    assert np.allclose(res.histories[0].q[:, 0], -res.histories[1].q[:, 0], atol=1e-12)
    with pytest.raises(IterationError) as info:
        dy.integrate_relaxation(cfg.system, cfg.horizon, max_iter=1)
    assert len(info.value.trace) == 1


def test_relaxation_fixed_points_merge_equivalent_guesses():
    cfg = load_config(preset_config("FSTWindow"))
    system = cfg.system
    times = system.step * np.arange(int(round(cfg.horizon / system.step)) + 1)
    guesses = [None]
    for shift in (0.01, -0.02):
        guesses.append([TrajectoryHistory.sample(
            inertial_worldline(c.q0, [0, shift, 0]), times,
            past=dy.Extension.prescribed(ini.aux), future=dy.Extension("inertial"))
            for c, ini in zip(system.charges, system.initial_fields())])
    found, failures = dy.relaxation_fixed_points(system, cfg.horizon, guesses, tol=1e-10)
    assert len(found) == 1 and failures == []


def test_ald_single_charge_runs_away():
    """A tiny applied wave seeds the self-accelerating mode a ~ exp(3 m t / (2 e^2))."""
    kick = PlaneWave([0, 0, 1.0], [1.0, 0, 0], amplitude=1e-6)
    cfg = dy.SystemConfig((dy.ChargeSpec([0, 0, 0], [0, 0, 0], charge=1.0, external=kick),),
                          self_force="ald", step=0.01)
    res = dy.integrate_retarded(cfg, 7.0)
    h = res.histories[0]
    window = (h.t >= 5) & (h.t <= 7)
    assert np.max(np.linalg.norm(h.velocity(h.t[window]), axis=-1)) < 0.1
    rate = np.polyfit(h.t[window], np.log(np.linalg.norm(h.a[window], axis=-1)), 1)[0]
    assert rate == pytest.approx(1.5, rel=0.02)
    longer = dy.integrate_retarded(cfg, 20.0)
    assert longer.halted and longer.reason.startswith("velocity_guard")
