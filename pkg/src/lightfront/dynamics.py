"""Delay-differential form of the Maxwell-Lorentz system.

Each charge i obeys dq_i/dt = v(p_i), dp_i/dt = sum_j e_ij L_ij + F0_i, where
L_ij is the Lorentz force of the (possibly smeared) field of charge j.  With
purely retarded fields (lambda = 1) the system is causal and is marched
forward with RK4; with advanced contributions it is solved on a time window
by waveform relaxation.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core import (
    EPS_V,
    CouplingMatrix,
    DomainError,
    IterationError,
    Mollifier,
    ObstructionError,
    SingularFrontError,
    TrajectoryRangeError,
    VelocityGuardError,
    as_vec,
    mollifier_quadrature,
    norm,
    relativistic_velocity,
)
from .kinematics import (
    Branch,
    Extension,
    TrajectoryHistory,
    Worldline,
    inertial_worldline,
)
from .lw_fields import lw_field
from .propagation import (
    FreeField,
    InitialFieldSpec,
    ZeroField,
    evaluate_field,
    initial_shells,
    net_shell_coefficient,
    smeared_field,
)

DEFAULT_STEP = 1e-3


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ChargeSpec:
    """One charge: initial state at t = 0 and the data of its initial field.

    ``aux`` is the auxiliary history encoded in the initial field (default:
    inertial motion with the initial momentum, i.e. the charge came in
    uniformly from the remote past).  ``free`` is the free part of that
    initial field and ``external`` an applied field acting on this charge.
    """

    q0: np.ndarray
    p0: np.ndarray
    mass: float = 1.0
    charge: float = 1.0
    aux: Worldline = None
    free: FreeField = field(default_factory=ZeroField)
    external: FreeField = None

    def __post_init__(self):
        object.__setattr__(self, "q0", as_vec(self.q0, "q0"))
        object.__setattr__(self, "p0", as_vec(self.p0, "p0"))
        if not self.mass > 0:
            raise DomainError("mass must be positive")

    def auxiliary(self):
        if self.aux is not None:
            return self.aux
        return inertial_worldline(self.q0, self.p0, self.mass)


@dataclass(frozen=True)
class SystemConfig:
    """N charges, couplings e_ij, the mixing parameter lambda and numerics.

    ``rho`` is a :class:`Mollifier` for extended charges or ``None`` for
    point charges.  The field of a charge is never evaluated on its own
    worldline, so every e_ii must vanish; with ``self_force="ald"`` the
    radiation reaction is added through the nonrelativistic
    Abraham-Lorentz-Dirac term (2/3) e^2 da/dt.
    """

    charges: tuple
    coupling: CouplingMatrix = None
    lam: float = 1.0
    rho: Mollifier = None
    self_force: str = "none"
    step: float = DEFAULT_STEP
    collision_radius: float = 1e-6

    def __post_init__(self):
        charges = tuple(self.charges)
        object.__setattr__(self, "charges", charges)
        n = len(charges)
        if n == 0:
            raise DomainError("charges: at least one charge is required")
        coupling = self.coupling or CouplingMatrix.no_self_interaction(n)
        object.__setattr__(self, "coupling", coupling)
        if coupling.n != n:
            raise DomainError(f"coupling: expected a {n}x{n} matrix")
        if coupling.has_self_interaction:
            raise DomainError(
                "coupling: diagonal entries must be zero; the self-field of a charge is "
                "ill-defined here, use self_force='ald' for radiation reaction")
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError("lambda: must lie in [0, 1]")
        if self.self_force not in ("none", "ald"):
            raise DomainError(f"self_force: unknown option {self.self_force!r}")
        if not self.step > 0:
            raise DomainError("integrator.step: must be positive")

    @property
    def n(self):
        return len(self.charges)

    def initial_fields(self):
        return [InitialFieldSpec(self.lam, c.auxiliary(), c.free) for c in self.charges]

    def with_initial_fields(self, inits):
        charges = tuple(replace(c, aux=ini.aux, free=ini.free) for c, ini in zip(self.charges, inits))
        return replace(self, charges=charges)


# ---------------------------------------------------------------------------
# forces


def acceleration_from_force(p, force, mass):
    """a = dv/dt for dp/dt = force: (F - v (v . F)) / (gamma m)."""
    v = relativistic_velocity(p, mass)
    gamma = 1 / np.sqrt(1 - np.sum(v * v, axis=-1, keepdims=True))
    return (force - v * np.sum(v * force, axis=-1, keepdims=True)) / (gamma * mass)


def momentum_rate(v, a, mass):
    """dp/dt = m gamma (a + gamma^2 v (v . a)) for p = m gamma v."""
    g2 = 1 / (1 - np.sum(v * v, axis=-1, keepdims=True))
    return mass * np.sqrt(g2) * (a + g2 * v * np.sum(v * a, axis=-1, keepdims=True))


def lorentz_force(i, t, q, p, sources, config):
    """Force on charge i at time t given positions/momenta of all charges.

    ``sources[j]`` maps (x, t) to the unit-charge field of charge j (or is
    ``None``); the applied field of charge i is added without coupling.
    """
    ci = config.charges[i]
    v = relativistic_velocity(p[i], ci.mass)
    E = np.zeros(3)
    B = np.zeros(3)
    for j, src in enumerate(sources):
        eij = config.coupling.e[i, j]
        if src is None or eij == 0 or j == i:
            continue
        f = src(q[i], t)
        w = eij * config.charges[j].charge
        E = E + w * f.E
        B = B + w * f.B
    if ci.external is not None:
        f = ci.external.evaluate(q[i], t)
        E = E + f.E
        B = B + f.B
    return ci.charge * (E + np.cross(v, B))


def _retarded_source(hist, init, rho):
    if rho is None:
        return lambda x, t: evaluate_field(hist, init, x, t).regular
    return lambda x, t: smeared_field(hist, init, rho, x, t)


def _mixed_source(worldline, lam, free, rho):
    def point(x, t):
        f = free.evaluate(x, t)
        if lam > 0:
            f = f + lam * lw_field(worldline, x, t, Branch.RETARDED)
        if lam < 1:
            f = f + (1 - lam) * lw_field(worldline, x, t, Branch.ADVANCED)
        return f

    if rho is None:
        return point

    def smeared(x, t):
        qt = worldline.position(t)
        if norm(x - qt) < rho.radius:
            raise ObstructionError("source charge inside the mollifier support",
                                   obstruction={"position": qt.tolist(), "time": t})
        val = mollifier_quadrature(rho, lambda pts: point(pts, t).as_array(), x)
        return type(free.evaluate(x, t))(val[:3], val[3:])

    return smeared


# ---------------------------------------------------------------------------
# front crossings


@dataclass(frozen=True)
class CrossingEvent:
    charge: int
    source: int
    t_star: float
    location: np.ndarray
    singular: bool = True

    def to_dict(self):
        return {"event": "front_crossing", "charge": self.charge, "source": self.source,
                "t_star": self.t_star, "location": np.asarray(self.location).tolist(),
                "singular": self.singular}


def detect_front_crossing(trajectories, sources, horizon, t_from=None):
    """Earliest times at which each trajectory meets each forward light cone.

    ``sources`` is a list of space-time points (t0, q0).  On a time-like
    trajectory g(t) = |q(t) - q0| - (t - t0) is strictly decreasing, so the
    root is unique and at least the initial distance after t0.
    """
    events = []
    for i, traj in enumerate(trajectories):
        for s, (t0, q0) in enumerate(sources):
            q0 = as_vec(q0, "q0")
            lo = max(float(t0), float(t_from) if t_from is not None else -np.inf, traj.t_min)
            hi = min(float(horizon), traj.t_max)
            if not hi > lo:
                continue

            def g(t):
                return float(norm(traj.position(t) - q0)) - (t - t0)

            g_lo, g_hi = g(lo), g(hi)
            if g_lo < 0 or g_hi > 0:
                continue
            t_star = lo if g_lo == 0 else brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
            events.append(CrossingEvent(i, s, t_star, traj.position(t_star)))
    return events


# ---------------------------------------------------------------------------
# marching solver


@dataclass
class SimulationResult:
    histories: list
    events: list
    halted: bool
    reason: str
    t_end: float
    step: float

    def events_dict(self):
        return {"halted": self.halted, "reason": self.reason, "t_end": self.t_end,
                "step": self.step, "events": [e if isinstance(e, dict) else e.to_dict() for e in self.events]}


def _state_derivative(t, q, p, a_state, sources, config):
    n = config.n
    dq = np.empty((n, 3))
    dp = np.empty((n, 3))
    da = np.zeros((n, 3)) if a_state is not None else None
    forces = np.empty((n, 3))
    for i, c in enumerate(config.charges):
        v = relativistic_velocity(p[i], c.mass)
        if np.any(norm(v) >= 1 - EPS_V):
            raise VelocityGuardError(f"charge {i} reached |v| >= 1 - eps at t = {t}")
        F = lorentz_force(i, t, q, p, sources, config)
        forces[i] = F
        dq[i] = v
        if a_state is None:
            dp[i] = F
        else:
            # m a = F + (2/3) e^2 da/dt, written for the augmented state
            dp[i] = momentum_rate(v, a_state[i], c.mass)
            da[i] = 1.5 / c.charge**2 * (dp[i] - F)
    return dq, dp, da, forces


def _front_sources(hists, inits):
    """Charges whose initial shells do not cancel, i.e. (C1) fails."""
    return [j for j, (hh, ini) in enumerate(zip(hists, inits))
            if np.any(hh.velocity(0.0) != ini.aux.velocity(0.0))]


def integrate_retarded(config, horizon, step=None, detect_fronts=True):
    """March the retarded (lambda = 1) system from t = 0 to ``horizon``.

    The part of each field coming from t < 0 is fixed by the charge's initial
    field (its auxiliary history).  Whenever a charge crosses the light cone
    of another charge's initial point and the shells there do not cancel,
    point-charge dynamics cannot continue: integration stops before the
    crossing step and the event carries t*.  Smeared charges pass the front
    smoothly and only the crossing is recorded.
    """
    if config.lam != 1.0:
        raise DomainError("lambda: the marching solver needs lambda = 1; use integrate_relaxation")
    h = float(step or config.step)
    nsteps = int(round(horizon / h))
    if nsteps < 1:
        raise DomainError("horizon must cover at least one step")
    inits = config.initial_fields()
    n = config.n
    q = np.array([c.q0 for c in config.charges])
    p = np.array([c.p0 for c in config.charges])
    ald = config.self_force == "ald"
    rho = config.rho

    hists = [TrajectoryHistory.open(0.0, q[j], p[j], np.zeros(3), mass=c.mass, past=Extension.prescribed(ini.aux))
             for j, (c, ini) in enumerate(zip(config.charges, inits))]
    sources = [_retarded_source(hists[j], inits[j], rho) for j in range(n)]
    _, _, _, F0 = _state_derivative(0.0, q, p, None, sources, config)
    a = np.array([acceleration_from_force(p[j], F0[j], c.mass) for j, c in enumerate(config.charges)])
    # restart the histories with the correct initial acceleration
    for j, c in enumerate(config.charges):
        hists[j] = TrajectoryHistory.open(0.0, q[j], p[j], a[j], mass=c.mass,
                                          past=Extension.prescribed(inits[j].aux))
    sources = [_retarded_source(hists[j], inits[j], rho) for j in range(n)]
    front = _front_sources(hists, inits) if detect_fronts else []

    events, reason, halted = [], "horizon", False
    t = 0.0
    for k in range(nsteps):
        try:
            y_a = a if ald else None

            def f(tt, qq, pp, aa):
                dq, dp, da, _ = _state_derivative(tt, qq, pp, aa, sources, config)
                return dq, dp, da

            stages = [f(t, q, p, y_a)]
            for c_ in (0.5, 0.5, 1.0):
                prev = stages[-1]
                aa = y_a + c_ * h * prev[2] if ald else None
                stages.append(f(t + c_ * h, q + c_ * h * prev[0], p + c_ * h * prev[1], aa))
            w = (1, 2, 2, 1)
            q_new = q + h / 6 * sum(wi * s[0] for wi, s in zip(w, stages))
            p_new = p + h / 6 * sum(wi * s[1] for wi, s in zip(w, stages))
            t_new = (k + 1) * h
            if ald:
                a_new = y_a + h / 6 * sum(wi * s[2] for wi, s in zip(w, stages))
            else:
                # provisional node (old acceleration) so the force at t_new
                # sees the new state; it is replaced right below
                for j in range(n):
                    hists[j].append(t_new, q_new[j], p_new[j], a[j])
                _, _, _, F = _state_derivative(t_new, q_new, p_new, None, sources, config)
                for j in range(n):
                    hists[j].pop()
                a_new = np.array([acceleration_from_force(p_new[j], F[j], c.mass)
                                  for j, c in enumerate(config.charges)])
        except VelocityGuardError as exc:
            reason, halted = f"velocity_guard: {exc}", True
            events.append({"event": "velocity_guard", "t": t, "message": str(exc)})
            break
        except SingularFrontError as exc:
            reason, halted = "singular_front", True
            events.append(exc.to_dict())
            break
        except ObstructionError as exc:
            reason, halted = "collision", True
            events.append({"event": "collision", "t": t, "message": str(exc)})
            break

        for j in range(n):
            hists[j].append(t_new, q_new[j], p_new[j], a_new[j])

        stop = False
        if front:
            crossing = detect_front_crossing(hists, [(0.0, config.charges[j].q0) for j in front],
                                             horizon=t_new, t_from=t)
            for ev in crossing:
                j = front[ev.source]
                if ev.charge == j or config.coupling.e[ev.charge, j] == 0:
                    continue
                shells = initial_shells(hists[j], inits[j], ev.t_star)
                net = net_shell_coefficient(shells, ev.location).as_array()
                singular = bool(np.any(net != 0)) and rho is None
                e = CrossingEvent(ev.charge, j, ev.t_star, ev.location, singular)
                events.append(e)
                if singular:
                    stop = True
        if stop:
            for hh in hists:
                hh.pop()
            reason, halted = "singular_front", True
            break
        dist = min((norm(q_new[i] - q_new[j]) for i in range(n) for j in range(i)), default=np.inf)
        q, p, a, t = q_new, p_new, a_new, t_new
        if dist < config.collision_radius:
            reason, halted = "collision", True
            events.append({"event": "collision", "t": t, "distance": float(dist)})
            break

    sealed = [hh.seal(Extension("none")) for hh in hists]
    return SimulationResult(sealed, events, halted, reason, float(sealed[0].t_max), h)


def field_sources(config, histories, inits=None):
    """Field evaluators of a finished retarded run (for residual checks)."""
    inits = inits or config.initial_fields()
    return [_retarded_source(hh, ini, config.rho) for hh, ini in zip(histories, inits)]


def eq32_residual(config, histories, inits=None, points="midpoints"):
    """max_i |dp_i/dt - F_i| over dense-output points, fields recomputed from scratch."""
    sources = field_sources(config, histories, inits)
    t = histories[0].t
    ts = 0.5 * (t[1:] + t[:-1]) if isinstance(points, str) else np.asarray(points, dtype=float)
    worst = 0.0
    for tt in ts:
        q = np.array([hh.position(tt) for hh in histories])
        v = np.array([hh.velocity(tt) for hh in histories])
        acc = np.array([hh.acceleration(tt) for hh in histories])
        p = np.array([hh.momentum(tt) for hh in histories])
        for i, c in enumerate(config.charges):
            F = lorentz_force(i, tt, q, p, sources, config)
            res = momentum_rate(v[i], acc[i], c.mass) - F
            worst = max(worst, float(norm(res)))
    return worst


# ---------------------------------------------------------------------------
# waveform relaxation


@dataclass
class RelaxationResult:
    histories: list
    iterations: int
    trace: list
    converged: bool

    @property
    def contraction_ratios(self):
        tr = np.asarray(self.trace[1:], dtype=float)
        return tr[1:] / tr[:-1] if len(tr) > 1 else np.array([])

    def to_dict(self):
        return {"iterations": self.iterations, "trace": self.trace, "converged": self.converged}


def _rk4_prescribed(config, sources, times):
    """Solve all charges' ODEs through prescribed field sources."""
    n = config.n
    q = np.array([c.q0 for c in config.charges])
    p = np.array([c.p0 for c in config.charges])

    def f(tt, qq, pp):
        dq, dp, _, F = _state_derivative(tt, qq, pp, None, sources, config)
        return dq, dp, F

    Q = [q]
    P = [p]
    A = []
    for k in range(len(times) - 1):
        t, h = times[k], times[k + 1] - times[k]
        k1 = f(t, q, p)
        A.append([acceleration_from_force(p[i], k1[2][i], c.mass) for i, c in enumerate(config.charges)])
        k2 = f(t + h / 2, q + h / 2 * k1[0], p + h / 2 * k1[1])
        k3 = f(t + h / 2, q + h / 2 * k2[0], p + h / 2 * k2[1])
        k4 = f(t + h, q + h * k3[0], p + h * k3[1])
        q = q + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        p = p + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        Q.append(q)
        P.append(p)
    _, _, F = f(times[-1], q, p)
    A.append([acceleration_from_force(p[i], F[i], c.mass) for i, c in enumerate(config.charges)])
    Q, P, A = np.array(Q), np.array(P), np.array(A)
    return Q, P, A


def integrate_relaxation(config, horizon, step=None, future=None, tol=1e-8, max_iter=50,
                         initial_guess=None):
    """Waveform relaxation on [0, horizon].

    For t < 0 each charge follows its auxiliary history; for t > horizon it
    follows ``future[i]`` (default: inertial continuation of the current
    iterate).  Every sweep recomputes all trajectories on the window from the
    fields lambda f^- + (1 - lambda) f^+ of the previous sweep, and stops when
    positions change by less than ``tol`` in sup norm.
    """
    h = float(step or config.step)
    nsteps = int(round(horizon / h))
    times = h * np.arange(nsteps + 1)
    inits = config.initial_fields()
    n = config.n

    def wrap(Q, P, A):
        out = []
        for j, c in enumerate(config.charges):
            fut = Extension.prescribed(future[j]) if future is not None else Extension("inertial")
            out.append(TrajectoryHistory(times, Q[:, j], P[:, j], A[:, j], mass=c.mass,
                                         past=Extension.prescribed(inits[j].aux), future=fut))
        return out

    if initial_guess is None:
        guess = []
        for j, c in enumerate(config.charges):
            guess.append(TrajectoryHistory.sample(inertial_worldline(c.q0, c.p0, c.mass), times,
                                                  past=Extension.prescribed(inits[j].aux),
                                                  future=Extension("inertial")))
    else:
        guess = list(initial_guess)
    current = guess
    prev_q = np.stack([hh.q for hh in current], axis=1)
    trace = []
    for it in range(1, max_iter + 1):
        sources = [_mixed_source(current[j], config.lam, inits[j].free, config.rho) for j in range(n)]
        Q, P, A = _rk4_prescribed(config, sources, times)
        current = wrap(Q, P, A)
        diff = float(np.max(np.abs(Q - prev_q)))
        trace.append(diff)
        prev_q = Q
        if diff < tol:
            return RelaxationResult(current, it, trace, True)
    raise IterationError(f"waveform relaxation did not converge in {max_iter} sweeps", trace)


def relaxation_fixed_points(config, horizon, guesses, step=None, future=None, tol=1e-8,
                            max_iter=50, distinct_tol=1e-6):
    """Run waveform relaxation from several initial iterates.

    Returns the distinct converged solutions (two solutions are the same if
    their positions agree to ``distinct_tol``) and the traces of the runs that
    failed.  Finding more than one fixed point means the window data do not
    determine the solution; nothing here decides which one is meant.
    """
    found, failures = [], []
    for guess in guesses:
        try:
            res = integrate_relaxation(config, horizon, step, future, tol, max_iter,
                                       initial_guess=guess)
        except IterationError as exc:
            failures.append(exc.trace)
            continue
        q = np.stack([hh.q for hh in res.histories])
        if not any(np.max(np.abs(q - other)) <= distinct_tol for other, _ in found):
            found.append((q, res))
    return [r for _, r in found], failures


# ---------------------------------------------------------------------------
# runaway toy


@dataclass(frozen=True)
class RunawayProbe:
    rate: float
    expected: float
    relative_error: float
    runaway: bool


def ald_runaway_probe(m, e, a0, horizon=None, samples=200):
    """Fit the growth rate of m a = (2/3) e^2 da/dt started with acceleration a0.

    The third-order equation is integrated numerically for (x, v, a) and the
    rate is read off a least-squares fit of log|a(t)|.
    """
    a0 = np.atleast_1d(np.asarray(a0, dtype=float))
    expected = 1.5 * m / e**2
    if not np.any(a0):
        return RunawayProbe(0.0, expected, np.inf if expected else 0.0, False)
    horizon = horizon or 5.0 / expected
    k = len(a0)

    def rhs(t, y):
        a = y[2 * k:]
        return np.concatenate([y[k:2 * k], a, (m / (2.0 / 3.0 * e**2)) * a])

    ts = np.linspace(0, horizon, samples)
    sol = solve_ivp(rhs, (0, horizon), np.concatenate([np.zeros(2 * k), a0]), method="DOP853",
                    t_eval=ts, rtol=1e-12, atol=1e-14 * float(np.max(np.abs(a0))))
    amag = np.linalg.norm(sol.y[2 * k:], axis=0)
    rate = float(np.polyfit(ts, np.log(amag), 1)[0])
    return RunawayProbe(rate, expected, abs(rate - expected) / expected, rate > 0)
