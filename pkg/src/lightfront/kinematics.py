"""Charge worldlines, dense trajectory histories and the light-cone time solver."""

import csv
import enum
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .core import (
    EPS_V,
    R_MIN,
    ChargeState,
    DomainError,
    SingularityError,
    TrajectoryRangeError,
    VelocityGuardError,
    as_vec,
    dot,
    momentum_from_velocity,
    norm,
    relativistic_velocity,
)


class Branch(enum.Enum):
    """Light-cone branch; the value is the sign used in t^pm = t pm r."""

    RETARDED = -1
    ADVANCED = 1

    @classmethod
    def for_time(cls, t):
        """Branch of f^{-sigma(t)}: retarded for t >= 0, advanced for t < 0."""
        return cls.RETARDED if t >= 0 else cls.ADVANCED


@dataclass(frozen=True)
class Extension:
    """How a worldline continues beyond its sampled domain.

    kinds: ``inertial`` (constant momentum), ``frozen`` (at rest at the end
    point), ``prescribed`` (delegate to ``worldline``), ``extrapolate``
    (second-order Taylor step, used for histories under construction) and
    ``none``.
    """

    kind: str = "inertial"
    worldline: object = None

    def __post_init__(self):
        if self.kind not in ("inertial", "frozen", "prescribed", "extrapolate", "none"):
            raise DomainError(f"unknown extension kind {self.kind!r}")
        if self.kind == "prescribed" and self.worldline is None:
            raise DomainError("prescribed extension needs a worldline")

    @classmethod
    def inertial(cls):
        return cls("inertial")

    @classmethod
    def frozen(cls):
        return cls("frozen")

    @classmethod
    def prescribed(cls, worldline):
        return cls("prescribed", worldline)

    @classmethod
    def none(cls):
        return cls("none")


PastExtension = Extension


class Worldline:
    """A time-like charge trajectory t -> (q, v, a) in natural units.

    Subclasses implement ``_core(t)`` on ``[t_min, t_max]``; queries outside
    are routed to the ``past``/``future`` extensions.
    """

    mass = 1.0
    t_min = -np.inf
    t_max = np.inf
    past = Extension("none")
    future = Extension("none")

    def _core(self, t):
        raise NotImplementedError

    def query(self, t):
        t = np.asarray(t, dtype=float)
        shape = t.shape
        tf = np.atleast_1d(t).ravel()
        q = np.empty(tf.shape + (3,))
        v = np.empty_like(q)
        a = np.empty_like(q)
        lo = tf < self.t_min
        hi = tf > self.t_max
        mid = ~(lo | hi)
        if np.any(mid):
            q[mid], v[mid], a[mid] = self._core(tf[mid])
        for mask, ext, edge in ((lo, self.past, self.t_min), (hi, self.future, self.t_max)):
            if np.any(mask):
                q[mask], v[mask], a[mask] = self._extend(tf[mask], ext, edge)
        return q.reshape(shape + (3,)), v.reshape(shape + (3,)), a.reshape(shape + (3,))

    def _extend(self, t, ext, edge):
        if ext.kind == "none":
            raise TrajectoryRangeError(
                f"time {t.min() if edge == self.t_min else t.max()} outside trajectory "
                f"domain [{self.t_min}, {self.t_max}] and no extension"
            )
        if ext.kind == "prescribed":
            return ext.worldline.query(t)
        q0, v0, a0 = (arr[0] for arr in self._core(np.array([edge])))
        dt = (t - edge)[:, None]
        if ext.kind == "inertial":
            return q0 + v0 * dt, np.broadcast_to(v0, dt.shape[:1] + (3,)).copy(), np.zeros((len(t), 3))
        if ext.kind == "frozen":
            z = np.zeros((len(t), 3))
            return np.broadcast_to(q0, z.shape).copy(), z, z.copy()
        # extrapolate
        return q0 + v0 * dt + 0.5 * a0 * dt**2, v0 + a0 * dt, np.broadcast_to(a0, dt.shape[:1] + (3,)).copy()

    def position(self, t):
        return self.query(t)[0]

    def velocity(self, t):
        return self.query(t)[1]

    def acceleration(self, t):
        return self.query(t)[2]

    def momentum(self, t):
        return momentum_from_velocity(self.velocity(t), self.mass)

    def state(self, t):
        q, v, _ = self.query(float(t))
        return ChargeState(q, momentum_from_velocity(v, self.mass))


class AnalyticWorldline(Worldline):
    """Worldline given by vectorised callables for q(t), v(t) and a(t)."""

    def __init__(self, position, velocity, acceleration, mass=1.0,
                 t_min=-np.inf, t_max=np.inf, past=None, future=None, name=""):
        self._q, self._v, self._a = position, velocity, acceleration
        self.mass = float(mass)
        self.t_min, self.t_max = float(t_min), float(t_max)
        self.past = past or Extension("none")
        self.future = future or Extension("none")
        self.name = name

    def _core(self, t):
        return (
            np.asarray(self._q(t), dtype=float).reshape(len(t), 3),
            np.asarray(self._v(t), dtype=float).reshape(len(t), 3),
            np.asarray(self._a(t), dtype=float).reshape(len(t), 3),
        )

    def __repr__(self):
        return f"AnalyticWorldline({self.name or 'custom'}, mass={self.mass})"


def _tile(vec, t):
    return np.broadcast_to(vec, (len(t), 3)).copy()


def static_worldline(q0, mass=1.0):
    q0 = as_vec(q0, "q0")
    z = np.zeros(3)
    return AnalyticWorldline(
        lambda t: _tile(q0, t), lambda t: _tile(z, t), lambda t: _tile(z, t),
        mass=mass, name="static",
    )


def inertial_worldline(q0, p0, mass=1.0, t0=0.0):
    """Uniform motion through q0 at time t0 with momentum p0."""
    q0 = as_vec(q0, "q0")
    v = relativistic_velocity(p0, mass)
    z = np.zeros(3)
    return AnalyticWorldline(
        lambda t: q0 + v * (np.asarray(t)[:, None] - t0),
        lambda t: _tile(v, t), lambda t: _tile(z, t), mass=mass, name="inertial",
    )


def hyperbolic_worldline(q0, accel, mass=1.0):
    """Constant proper acceleration along ``accel``, at rest in q0 at t = 0."""
    q0 = as_vec(q0, "q0")
    accel = as_vec(accel, "accel")
    alpha = float(norm(accel))
    if alpha == 0:
        return static_worldline(q0, mass)
    e = accel / alpha

    def pos(t):
        t = np.asarray(t)[:, None]
        return q0 + e * (np.sqrt(1 + (alpha * t) ** 2) - 1) / alpha

    def vel(t):
        t = np.asarray(t)[:, None]
        return e * alpha * t / np.sqrt(1 + (alpha * t) ** 2)

    def acc(t):
        t = np.asarray(t)[:, None]
        return e * alpha / (1 + (alpha * t) ** 2) ** 1.5

    return AnalyticWorldline(pos, vel, acc, mass=mass, name="hyperbolic")


def oscillating_worldline(q0, amplitude, omega, v0=(0, 0, 0), mass=1.0, phase=0.0):
    """q(t) = q0 + v0 t + amplitude * sin(omega t + phase)."""
    q0 = as_vec(q0, "q0")
    A = as_vec(amplitude, "amplitude")
    v0 = as_vec(v0, "v0")
    if norm(v0) + norm(A) * abs(omega) >= 1 - EPS_V:
        raise VelocityGuardError("oscillation parameters allow |v| >= 1")

    def pos(t):
        t = np.asarray(t)[:, None]
        return q0 + v0 * t + A * np.sin(omega * t + phase)

    def vel(t):
        t = np.asarray(t)[:, None]
        return v0 + A * omega * np.cos(omega * t + phase)

    def acc(t):
        t = np.asarray(t)[:, None]
        return -A * omega**2 * np.sin(omega * t + phase)

    return AnalyticWorldline(pos, vel, acc, mass=mass, name="oscillating")


def circular_worldline(radius, omega, center=(0, 0, 0), mass=1.0):
    center = as_vec(center, "center")
    if abs(radius * omega) >= 1 - EPS_V:
        raise VelocityGuardError("circular orbit speed must be below 1")

    def pos(t):
        t = np.asarray(t)
        return center + radius * np.stack([np.cos(omega * t), np.sin(omega * t), 0 * t], -1)

    def vel(t):
        t = np.asarray(t)
        return radius * omega * np.stack([-np.sin(omega * t), np.cos(omega * t), 0 * t], -1)

    def acc(t):
        t = np.asarray(t)
        return -radius * omega**2 * np.stack([np.cos(omega * t), np.sin(omega * t), 0 * t], -1)

    return AnalyticWorldline(pos, vel, acc, mass=mass, name="circular")


def gaussian_polynomial_worldline(q0, coeffs, width, mass=1.0):
    """q(t) = q0 + P(t) exp(-t^2 / width^2) with P(t) = sum_k coeffs[k-1] t^k.

    All derivatives at t = 0 are set by the polynomial coefficients while the
    velocity stays bounded for all t, which makes these handy for building
    trajectory pairs that agree at t = 0 up to a chosen order.
    """
    q0 = as_vec(q0, "q0")
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    polys = [Polynomial(np.concatenate([[0.0], coeffs[:, k]])) for k in range(3)]
    lin = Polynomial([0.0, -2.0 / width**2])
    derivs = [polys]
    for _ in range(2):
        derivs.append([p.deriv() + lin * p for p in derivs[-1]])

    def make(order):
        def f(t):
            t = np.asarray(t, dtype=float)
            g = np.exp(-(t / width) ** 2)
            out = np.stack([p(t) * g for p in derivs[order]], -1)
            return out + q0 if order == 0 else out
        return f

    w = AnalyticWorldline(make(0), make(1), make(2), mass=mass, name="gauss-poly")
    vmax = np.max(norm(w.velocity(np.linspace(-8 * width, 8 * width, 4001))))
    if vmax >= 1 - EPS_V:
        raise VelocityGuardError(f"gaussian-polynomial worldline reaches |v| = {vmax:.3f}")
    return w


class MomentumShiftedWorldline(Worldline):
    """``base`` with a constant velocity offset so that p(0) becomes ``p0``.

    q'(t) = q(t) + dv t, v' = v + dv, a' = a; q'(0) = q(0) is preserved.
    """

    def __init__(self, base, p0):
        self.base = base
        self.mass = base.mass
        v_old = base.velocity(0.0)
        self.dv = relativistic_velocity(p0, base.mass) - v_old

    def query(self, t):
        q, v, a = self.base.query(t)
        t = np.asarray(t, dtype=float)[..., None]
        v = v + self.dv
        if np.any(norm(v) >= 1 - EPS_V):
            raise VelocityGuardError("momentum shift pushes the worldline to |v| >= 1")
        return q + self.dv * t, v, a


def with_initial_momentum(worldline, p0):
    return MomentumShiftedWorldline(worldline, as_vec(p0, "p0"))


class TimeReversedWorldline(Worldline):
    """t -> q(-t); velocity flips sign, acceleration does not."""

    def __init__(self, base):
        self.base = base
        self.mass = base.mass

    def query(self, t):
        q, v, a = self.base.query(-np.asarray(t, dtype=float))
        return q, -v, a


# ---------------------------------------------------------------------------
# Dense-output trajectory histories

# quintic Hermite basis on s in [0, 1]; rows multiply
# [q0, h v0, h^2 a0, h^2 a1, h v1, q1], columns are powers s^0..s^5
_HERMITE5 = np.array([
    [1, 0, 0, -10, 15, -6],
    [0, 1, 0, -6, 8, -3],
    [0, 0, 0.5, -1.5, 1.5, -0.5],
    [0, 0, 0, 0.5, -1, 0.5],
    [0, 0, 0, -4, 7, -3],
    [0, 0, 0, 10, -15, 6],
], dtype=float)
_POW = np.arange(6)


def _powers(s, deriv):
    """d^deriv/ds^deriv of s^k for k = 0..5, shape (n, 6)."""
    k = _POW
    coef = np.ones(6)
    for j in range(deriv):
        coef = coef * np.clip(k - j, 0, None)
    expo = np.clip(k - deriv, 0, None)
    return coef * s[:, None] ** expo


class TrajectoryHistory(Worldline):
    """Sampled trajectory with piecewise quintic Hermite dense output.

    Nodes carry (t, q, p, a).  Positions are interpolated from (q, v, a) at
    both segment ends, and v, a are the exact derivatives of that
    interpolant, so the dense output is C^2 and kinematically consistent
    (dq/dt = v, dv/dt = a) everywhere.  Values are exact at the nodes.
    """

    def __init__(self, t, q, p, a, mass=1.0, past=None, future=None, check=True):
        t = np.asarray(t, dtype=float).ravel()
        q = np.asarray(q, dtype=float).reshape(-1, 3)
        p = np.asarray(p, dtype=float).reshape(-1, 3)
        a = np.asarray(a, dtype=float).reshape(-1, 3)
        if not (len(t) == len(q) == len(p) == len(a)) or len(t) < 1:
            raise DomainError("history arrays must be non-empty and of equal length")
        self.mass = float(mass)
        self.past = past or Extension("inertial")
        self.future = future or Extension("none")
        n = len(t)
        self._cap = max(16, n)
        self._t = np.empty(self._cap)
        self._q = np.empty((self._cap, 3))
        self._p = np.empty((self._cap, 3))
        self._v = np.empty((self._cap, 3))
        self._a = np.empty((self._cap, 3))
        self._n = 0
        if check:
            if np.any(np.diff(t) <= 0):
                raise DomainError("history times must be strictly increasing")
            for arr, name in ((q, "q"), (p, "p"), (a, "a")):
                if not np.all(np.isfinite(arr)):
                    raise DomainError(f"history {name} has non-finite entries")
        self._store(t, q, p, a, check)
        self.sealed = True

    def _store(self, t, q, p, a, check=True):
        n0, n = self._n, len(t)
        if n0 + n > self._cap:
            cap = max(2 * self._cap, n0 + n)
            for name in ("_t", "_q", "_p", "_v", "_a"):
                old = getattr(self, name)
                new = np.empty((cap,) + old.shape[1:])
                new[:n0] = old[:n0]
                setattr(self, name, new)
            self._cap = cap
        v = relativistic_velocity(p, self.mass)
        if check and np.any(norm(v) >= 1 - EPS_V):
            raise VelocityGuardError("history violates the time-like guard |v| < 1 - eps")
        self._t[n0:n0 + n] = t
        self._q[n0:n0 + n] = q
        self._p[n0:n0 + n] = p
        self._v[n0:n0 + n] = v
        self._a[n0:n0 + n] = a
        self._n = n0 + n

    # integrator-only mutation -------------------------------------------------
    @classmethod
    def open(cls, t0, q0, p0, a0, mass=1.0, past=None):
        h = cls([t0], [q0], [p0], [a0], mass=mass, past=past,
                future=Extension("extrapolate"))
        h.sealed = False
        return h

    def append(self, t, q, p, a):
        if self.sealed:
            raise DomainError("cannot append to a sealed history")
        if t <= self._t[self._n - 1]:
            raise DomainError("appended time must exceed the last node")
        self._store(np.array([t]), np.reshape(q, (1, 3)), np.reshape(p, (1, 3)), np.reshape(a, (1, 3)))

    def pop(self):
        if self.sealed or self._n <= 1:
            raise DomainError("cannot pop from this history")
        self._n -= 1

    def seal(self, future=None):
        """Return an immutable copy."""
        return TrajectoryHistory(self.t, self.q, self.p, self.a, mass=self.mass,
                                 past=self.past, future=future or Extension("none"),
                                 check=False)

    # -------------------------------------------------------------------------
    @property
    def t(self):
        return self._t[:self._n]

    @property
    def q(self):
        return self._q[:self._n]

    @property
    def p(self):
        return self._p[:self._n]

    @property
    def a(self):
        return self._a[:self._n]

    @property
    def t_min(self):
        return self._t[0]

    @property
    def t_max(self):
        return self._t[self._n - 1]

    def __len__(self):
        return self._n

    def _core(self, t):
        ts = self.t
        if self._n == 1:
            return (np.broadcast_to(self._q[0], (len(t), 3)).copy(),
                    np.broadcast_to(self._v[0], (len(t), 3)).copy(),
                    np.broadcast_to(self._a[0], (len(t), 3)).copy())
        k = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, self._n - 2)
        h = (ts[k + 1] - ts[k])[:, None]
        s = (t - ts[k]) / h[:, 0]
        data = np.stack([
            self._q[k], h * self._v[k], h**2 * self._a[k],
            h**2 * self._a[k + 1], h * self._v[k + 1], self._q[k + 1],
        ], axis=1)  # (n, 6, 3)
        coeffs = np.einsum("bp,nbc->npc", _HERMITE5, data)  # (n, 6 powers, 3)
        q = np.einsum("np,npc->nc", _powers(s, 0), coeffs)
        v = np.einsum("np,npc->nc", _powers(s, 1), coeffs) / h
        a = np.einsum("np,npc->nc", _powers(s, 2), coeffs) / h**2
        # return stored node data bit-for-bit; the basis is exact only up to rounding
        for node in (k, k + 1):
            hit = t == ts[node]
            if np.any(hit):
                q[hit], v[hit], a[hit] = self._q[node[hit]], self._v[node[hit]], self._a[node[hit]]
        return q, v, a

    @classmethod
    def sample(cls, worldline, times, past=None, future=None):
        """Sample a worldline at ``times`` into a history."""
        times = np.asarray(times, dtype=float)
        q, v, a = worldline.query(times)
        p = momentum_from_velocity(v, worldline.mass)
        return cls(times, q, p, a, mass=worldline.mass, past=past, future=future)

    # CSV interchange --------------------------------------------------------
    CSV_COLUMNS = ("t", "qx", "qy", "qz", "px", "py", "pz")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_COLUMNS)
            for t, q, p in zip(self.t, self.q, self.p):
                w.writerow([repr(float(x)) for x in (t, *q, *p)])

    @classmethod
    def from_csv(cls, path, mass=1.0, past=None, future=None):
        """Read a history; accelerations are recovered by differentiating v(p)."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(c.strip() for c in rows[0]) != cls.CSV_COLUMNS:
            raise DomainError(f"trajectory CSV must start with header {','.join(cls.CSV_COLUMNS)}")
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
        if data.ndim != 2 or data.shape[1] != 7 or len(data) < 3:
            raise DomainError("trajectory CSV needs at least three data rows of 7 columns")
        t, q, p = data[:, 0], data[:, 1:4], data[:, 4:7]
        if np.any(np.diff(t) <= 0):
            raise DomainError("trajectory CSV times must be strictly increasing")
        v = relativistic_velocity(p, mass)
        a = np.gradient(v, t, axis=0, edge_order=2)
        return cls(t, q, p, a, mass=mass, past=past, future=future)


def query(traj, t):
    """(q, v, a) of ``traj`` at time(s) ``t``."""
    return traj.query(t)


# ---------------------------------------------------------------------------
# Light-cone solver


@dataclass(frozen=True)
class LightConeData:
    """Solution of t^pm = t pm |x - q(t^pm)| together with the kinematics there."""

    t_pm: np.ndarray
    q: np.ndarray
    v: np.ndarray
    a: np.ndarray
    n: np.ndarray
    r: np.ndarray
    branch: Branch
    t: np.ndarray

    @property
    def residual(self):
        return np.abs(self.t_pm - self.t - self.branch.value * self.r)


_MAXIT = 200


def solve_lightcone_time(traj, x, t, branch=Branch.RETARDED, r_min=R_MIN, tol=1e-10):
    """Solve the retarded (or advanced) time equation for each point in ``x``.

    Writing t^pm = t pm tau, the function phi(tau) = tau - |x - q(t pm tau)|
    is strictly increasing for time-like worldlines with phi(0) < 0, so the
    root is unique.  We run Newton's method from tau = |x - q(t)| and fall
    back to bisection (or bracket doubling while no upper bracket is known)
    whenever a step leaves the current bracket.
    """
    x = as_vec(x, "x")
    shape = x.shape[:-1]
    X = x.reshape(-1, 3)
    T = np.broadcast_to(np.asarray(t, dtype=float), shape).ravel().copy()
    if not np.all(np.isfinite(T)):
        raise DomainError("time must be finite")
    s = branch.value

    r0 = norm(X - traj.position(T))
    if np.any(r0 < r_min):
        i = int(np.argmin(r0))
        raise SingularityError(
            f"query point {X[i].tolist()} lies on the worldline at t={T[i]}",
            point=X[i], time=T[i])
    tau = r0.copy()
    lo = np.zeros_like(tau)
    hi = np.full_like(tau, np.inf)
    tau_cap = r0 / EPS_V
    active = np.arange(len(tau))
    for _ in range(_MAXIT):
        if active.size == 0:
            break
        ta = tau[active]
        q, v, _ = traj.query(T[active] + s * ta)
        d = X[active] - q
        r = norm(d)
        phi = ta - r
        dphi = 1 + s * dot(d, v) / np.maximum(r, r_min)
        below = phi < 0
        lo[active] = np.where(below, np.maximum(lo[active], ta), lo[active])
        hi[active] = np.where(~below, np.minimum(hi[active], ta), hi[active])
        new = ta - phi / dphi
        la, ha = lo[active], hi[active]
        outside = ~((new > la) & (new < ha))
        fallback = np.where(np.isfinite(ha), 0.5 * (la + ha), 2 * np.maximum(ta, la))
        new = np.where(outside & (phi != 0), fallback, new)
        if np.any(new > tau_cap[active]):
            raise TrajectoryRangeError("no light-cone intersection found within the time-like bound")
        step = np.abs(new - ta)
        done = (phi == 0) | (step <= 4 * np.finfo(float).eps * (ta + np.abs(T[active]) + 1))
        tau[active] = np.where(phi == 0, ta, new)
        active = active[~done]
    else:
        raise TrajectoryRangeError("light-cone solver did not converge")

    t_pm = T + s * tau
    q, v, a = traj.query(t_pm)
    d = X - q
    r = norm(d)
    if np.any(r < r_min):
        raise SingularityError("query point coincides with the worldline at the light-cone time")
    res = np.abs(tau - r)
    if np.any(res > tol * (1 + tau)):
        raise TrajectoryRangeError(f"light-cone residual {res.max():.3e} above tolerance")
    n = d / r[:, None]
    return LightConeData(
        t_pm=t_pm.reshape(shape), q=q.reshape(shape + (3,)), v=v.reshape(shape + (3,)),
        a=a.reshape(shape + (3,)), n=n.reshape(shape + (3,)), r=r.reshape(shape),
        branch=branch, t=T.reshape(shape),
    )
