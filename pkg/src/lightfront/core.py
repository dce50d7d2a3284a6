"""Shared domain types, unit handling, the charge-density mollifier and errors.

Everything inside the package works in natural units: c = 1 and the vacuum
permittivity equals 1/(4*pi), so the Coulomb field of a unit charge is
``(x - q) / |x - q|**3``.  SI values only appear at I/O boundaries through
:class:`Units`.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.constants as SI
from scipy.integrate import lebedev_rule, quad

# Default tolerances
ROOT_TOL = 1e-12
QUAD_RTOL = 1e-8
EPS_V = 1e-9  # time-like guard: |v| < 1 - EPS_V
R_MIN = 1e-12  # closest admissible approach to a worldline


class LightFrontError(Exception):
    """Base class for all structured errors raised by this package."""


class DomainError(LightFrontError, ValueError):
    pass


class SingularityError(LightFrontError):
    """A field was requested on (or too close to) a charge worldline."""

    def __init__(self, message, point=None, time=None):
        super().__init__(message)
        self.point = point
        self.time = time


class TrajectoryRangeError(LightFrontError):
    pass


class VelocityGuardError(LightFrontError):
    pass


class SingularFrontError(LightFrontError):
    """Evaluation hit a light front carrying an uncancelled delta shell.

    ``shells`` holds the :class:`~lightfront.propagation.SingularShell`
    records involved, ``radius`` the sphere radius |t| and ``time`` the
    evaluation time.
    """

    def __init__(self, message, shells=(), time=None, radius=None, points=None):
        super().__init__(message)
        self.shells = list(shells)
        self.time = time
        self.radius = radius
        self.points = points

    def to_dict(self):
        return {
            "event": "singular_front",
            "error": "singular_front",
            "message": str(self),
            "time": self.time,
            "radius": self.radius,
            "shells": [s.to_dict() for s in self.shells],
        }


class ObstructionError(LightFrontError):
    """The integrand of a mollifier quadrature is undefined inside the support."""

    def __init__(self, message, obstruction=None):
        super().__init__(message)
        self.obstruction = obstruction


class ResolutionError(LightFrontError):
    pass


class IterationError(LightFrontError):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


def as_vec(x, name="vector"):
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1:] != (3,):
        raise DomainError(f"{name} must have trailing dimension 3, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite components")
    return arr


def norm(x):
    return np.sqrt(np.sum(np.asarray(x) ** 2, axis=-1))


def dot(a, b):
    return np.sum(a * b, axis=-1)


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class ChargeState:
    """Position and momentum of one charge at one instant."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", as_vec(self.q, "q"))
        object.__setattr__(self, "p", as_vec(self.p, "p"))


@dataclass(frozen=True)
class EMFieldValue:
    """Electric/magnetic field pair; arrays may be batched with shape (..., 3)."""

    E: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.E, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if not (np.all(np.isfinite(E)) and np.all(np.isfinite(B))):
            raise DomainError("field evaluation produced non-finite values")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "B", B)

    @classmethod
    def zeros(cls, shape=()):
        return cls(np.zeros(tuple(shape) + (3,)), np.zeros(tuple(shape) + (3,)))

    def as_array(self):
        """Stack into a (..., 6) array ``[Ex, Ey, Ez, Bx, By, Bz]``."""
        return np.concatenate([self.E, self.B], axis=-1)

    def __add__(self, other):
        return EMFieldValue(self.E + other.E, self.B + other.B)

    def __sub__(self, other):
        return EMFieldValue(self.E - other.E, self.B - other.B)

    def __mul__(self, s):
        return EMFieldValue(self.E * s, self.B * s)

    __rmul__ = __mul__

    def __getitem__(self, idx):
        return EMFieldValue(self.E[idx], self.B[idx])


@dataclass(frozen=True)
class CouplingMatrix:
    """Coupling scalars e_ij switching the field of charge j on charge i."""

    e: np.ndarray

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.e, dtype=float))
        if e.shape[0] != e.shape[1] or not np.all(np.isfinite(e)):
            raise DomainError("coupling matrix must be square and finite")
        object.__setattr__(self, "e", e)

    @classmethod
    def no_self_interaction(cls, n):
        return cls(np.ones((n, n)) - np.eye(n))

    @classmethod
    def full(cls, n):
        return cls(np.ones((n, n)))

    @property
    def n(self):
        return self.e.shape[0]

    @property
    def has_self_interaction(self):
        return bool(np.any(np.diag(self.e) != 0))


_SI_FACTORS = {
    # multiply an SI value by this factor to get the natural-unit value
    "length": lambda c, k: 1.0,
    "time": lambda c, k: c,
    "velocity": lambda c, k: 1.0 / c,
    "acceleration": lambda c, k: 1.0 / c**2,
    "jerk": lambda c, k: 1.0 / c**3,
    "mass": lambda c, k: c**2,
    "momentum": lambda c, k: c,
    "energy": lambda c, k: 1.0,
    "force": lambda c, k: 1.0,
    "power": lambda c, k: 1.0 / c,
    "charge": lambda c, k: 1.0 / k,
    "efield": lambda c, k: k,
    "bfield": lambda c, k: c * k,
}


@dataclass(frozen=True)
class Units:
    """Unit system at an I/O boundary.

    The natural system keeps metres as the length unit, measures time in
    light-metres (``c t``), masses as rest energies (J) and charges in
    ``sqrt(J m)`` so that ``4 pi eps0 = 1``.
    """

    mode: str = "natural"
    c: float = SI.c
    epsilon0: float = SI.epsilon_0
    e_charge: float = SI.e
    m_electron: float = SI.m_e

    def __post_init__(self):
        if self.mode not in ("natural", "si"):
            raise DomainError(f"unknown unit mode {self.mode!r}")

    @classmethod
    def natural(cls):
        return cls("natural")

    @classmethod
    def si(cls):
        return cls("si")

    @property
    def is_natural(self):
        return self.mode == "natural"

    @property
    def coulomb_constant(self):
        """1/(4 pi eps0) in this unit system."""
        return 1.0 if self.is_natural else 1.0 / (4 * np.pi * self.epsilon0)

    @property
    def eps0(self):
        return 1.0 / (4 * np.pi) if self.is_natural else self.epsilon0

    @property
    def speed_of_light(self):
        return 1.0 if self.is_natural else self.c

    def factor(self, kind):
        if self.is_natural:
            return 1.0
        try:
            f = _SI_FACTORS[kind]
        except KeyError:
            raise DomainError(f"unknown quantity kind {kind!r}") from None
        return f(self.c, np.sqrt(4 * np.pi * self.epsilon0))

    def to_natural(self, value, kind):
        return np.asarray(value, dtype=float) * self.factor(kind)

    def from_natural(self, value, kind):
        return np.asarray(value, dtype=float) / self.factor(kind)


def bump_profile(s):
    """C-infinity bump exp(-1/(1 - s^2)) on |s| < 1, zero outside."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def sphere_rule(degree):
    """Lebedev nodes (n, 3) and weights normalised to sum to one."""
    x, w = lebedev_rule(degree)
    return np.ascontiguousarray(x.T), w / w.sum()


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class Mollifier:
    """Rigid radial charge density rho(y) = C * profile(|y| / R).

    ``C`` is fixed numerically so that the density integrates to
    ``total_charge``.  ``n_radial`` and ``sphere_degree`` define the fixed
    product quadrature used by :func:`mollifier_quadrature`.
    """

    radius: float
    total_charge: float = 1.0
    profile: Callable = bump_profile
    n_radial: int = 48
    sphere_degree: int = 17
    norm_const: float = field(init=False, repr=False, default=1.0)

    def __post_init__(self):
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise DomainError("mollifier radius must be positive")
        prof = self.profile
        mass, _ = quad(
            lambda s: 4 * np.pi * s * s * float(prof(np.array([s]))[0]),
            0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200,
        )
        object.__setattr__(
            self, "norm_const", self.total_charge / (mass * self.radius**3)
        )

    @property
    def diameter(self):
        return 2 * self.radius

    def density(self, y):
        r = norm(y)
        return self.norm_const * self.profile(r / self.radius)

    def nodes(self, n_radial=None, sphere_degree=None):
        """Offsets ``y`` (n, 3) and weights with sum(w g(x - y)) ~ (rho * g)(x)."""
        nr = n_radial or self.n_radial
        xs, ws = _gauss_legendre(nr)
        r = 0.5 * self.radius * (xs + 1)
        wr = 0.5 * self.radius * ws * 4 * np.pi * r**2 * self.density(r[:, None] * [1, 0, 0])
        dirs, wd = sphere_rule(sphere_degree or self.sphere_degree)
        offsets = (r[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
        weights = (wr[:, None] * wd[None, :]).ravel()
        return offsets, weights

    def total(self, n_radial=None):
        """Quadrature of rho over its support (should equal ``total_charge``)."""
        return self.nodes(n_radial)[1].sum()


# ---------------------------------------------------------------------------
# Operations


def relativistic_velocity(p, m):
    """v(p) = p / sqrt(p^2 + m^2); works on (..., 3) arrays."""
    p = as_vec(p, "momentum")
    if not (np.all(np.asarray(m) > 0) and np.all(np.isfinite(m))):
        raise DomainError("mass must be positive and finite")
    m = np.asarray(m, dtype=float)[..., None] if np.ndim(m) else float(m)
    return p / np.sqrt(np.sum(p * p, axis=-1, keepdims=True) + m * m)


def momentum_from_velocity(v, m):
    v = as_vec(v, "velocity")
    v2 = np.sum(v * v, axis=-1, keepdims=True)
    if np.any(v2 >= 1):
        raise VelocityGuardError("velocity must satisfy |v| < 1")
    return m * v / np.sqrt(1 - v2)


def mollifier_quadrature(rho, g, x, n_radial=None, sphere_degree=None):
    """Approximate (rho * g)(x) = int rho(y) g(x - y) d^3y.

    ``g`` maps an (n, 3) array of points to an (n, ...) array of values.  If
    ``g`` raises because of a singularity inside the support ball, the error
    is re-raised as :class:`ObstructionError` naming the obstruction.
    """
    x = as_vec(x, "x")
    offsets, weights = rho.nodes(n_radial, sphere_degree)
    pts = x[None, :] - offsets
    try:
        vals = np.asarray(g(pts), dtype=float)
    except (SingularityError, SingularFrontError) as exc:
        raise ObstructionError(
            f"integrand undefined inside the support ball of radius {rho.radius} "
            f"around {x.tolist()}: {exc}",
            obstruction=exc,
        ) from exc
    return np.tensordot(weights, vals, axes=(0, 0))
