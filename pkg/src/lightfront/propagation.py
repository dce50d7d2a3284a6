"""General point-charge Maxwell solution via the light-cone decomposition.

For an actual trajectory (q, p) and an initial field built from an
auxiliary trajectory (q~, p~), a mixing parameter lambda and a free field
f0, the field at time t is

    1_B(x) (f^s[q, p] - f^s[q~, p~])          inside the closed ball B = B_|t|(q0)
    + lambda f^-[q~, p~] + (1 - lambda) f^+[q~, p~]
    + r^s[q0, p0] - r^s[q~0, p~0]             delta shells on |x - q0| = |t|
    + f0_t

with s the retarded branch for t >= 0 and the advanced one for t < 0.  The
shells are kept symbolically: only their coefficient functions are ever
evaluated.
"""

import csv
import enum
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import (
    EMFieldValue,
    LightFrontError,
    ObstructionError,
    SingularFrontError,
    _gauss_legendre,
    as_vec,
    dot,
    mollifier_quadrature,
    norm,
    relativistic_velocity,
    sphere_rule,
)
from .kinematics import Branch, Worldline, static_worldline
from .lw_fields import lw_field

SHELL_BAND = 1e-9


class TabulationRangeError(LightFrontError):
    pass


# ---------------------------------------------------------------------------
# Free fields


class FreeField:
    """A solution of the source-free Maxwell equations."""

    kind = "abstract"

    def evaluate(self, x, t):
        raise NotImplementedError

    def cauchy_data(self, x):
        """Field and its time derivative at t = 0."""
        raise NotImplementedError

    def to_dict(self):
        return {"kind": self.kind}


class ZeroField(FreeField):
    kind = "zero"

    def evaluate(self, x, t):
        x = as_vec(x, "x")
        return EMFieldValue.zeros(x.shape[:-1])

    def cauchy_data(self, x):
        z = self.evaluate(x, 0.0)
        return z, z


def _unit(v, name):
    v = as_vec(v, name)
    n = norm(v)
    if n == 0:
        raise ValueError(f"{name} must be non-zero")
    return v / n


@dataclass(frozen=True)
class PlaneWave(FreeField):
    """E = A e cos(k.x - |k| t + phase), B = k^ x E."""

    k: np.ndarray
    polarization: np.ndarray
    amplitude: float = 1.0
    phase: float = 0.0
    kind = "plane_wave"

    def __post_init__(self):
        k = as_vec(self.k, "k")
        e = _unit(self.polarization, "polarization")
        if abs(dot(k, e)) > 1e-12 * norm(k):
            raise ValueError("plane-wave polarization must be orthogonal to k")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "polarization", e)

    def _phase(self, x, t):
        return x @ self.k - norm(self.k) * t + self.phase

    def evaluate(self, x, t):
        x = as_vec(x, "x")
        E = self.amplitude * np.cos(self._phase(x, t))[..., None] * self.polarization
        return EMFieldValue(E, np.cross(self.k / norm(self.k), E))

    def cauchy_data(self, x):
        x = as_vec(x, "x")
        f = self.evaluate(x, 0.0)
        dE = self.amplitude * norm(self.k) * np.sin(self._phase(x, 0.0))[..., None] * self.polarization
        return f, EMFieldValue(dE, np.cross(self.k / norm(self.k), dE))

    def to_dict(self):
        return {"kind": self.kind, "k": self.k.tolist(), "polarization": self.polarization.tolist(),
                "amplitude": self.amplitude, "phase": self.phase}


@dataclass(frozen=True)
class GaussianPulse(FreeField):
    """Plane-fronted pulse E = A e exp(-xi^2 / 2w^2), xi = d.(x - c) - t."""

    center: np.ndarray
    width: float
    direction: np.ndarray
    polarization: np.ndarray
    amplitude: float = 1.0
    kind = "gaussian_pulse"

    def __post_init__(self):
        d = _unit(self.direction, "direction")
        e = _unit(self.polarization, "polarization")
        if abs(dot(d, e)) > 1e-12:
            raise ValueError("pulse polarization must be orthogonal to its direction")
        object.__setattr__(self, "center", as_vec(self.center, "center"))
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "polarization", e)

    def _xi(self, x, t):
        return (x - self.center) @ self.direction - t

    def evaluate(self, x, t):
        x = as_vec(x, "x")
        g = np.exp(-self._xi(x, t) ** 2 / (2 * self.width**2))
        E = self.amplitude * g[..., None] * self.polarization
        return EMFieldValue(E, np.cross(self.direction, E))

    def cauchy_data(self, x):
        x = as_vec(x, "x")
        xi = self._xi(x, 0.0)
        f = self.evaluate(x, 0.0)
        dE = f.E * (xi / self.width**2)[..., None]
        return f, EMFieldValue(dE, np.cross(self.direction, dE))

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "width": self.width,
                "direction": self.direction.tolist(), "polarization": self.polarization.tolist(),
                "amplitude": self.amplitude}


class TabulatedCauchyData(FreeField):
    """Free field given by gridded Cauchy data (f0, d/dt f0) at t = 0.

    Values are interpolated with quintic B-splines (so the data should be at
    least C^2) and propagated with Kirchhoff's formula,

        u(x, t) = M[u0] + |t| M[w . grad u0] + t M[u1],

    where M is the mean over the sphere of radius |t| about x, computed with a
    Lebedev rule of degree ``sphere_degree``.
    """

    kind = "tabulated"

    def __init__(self, axes, values, rates, sphere_degree=41, spline_order=5):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        shape = tuple(len(a) for a in self.axes)
        values = np.asarray(values, dtype=float)
        rates = np.asarray(rates, dtype=float)
        if values.shape != shape + (6,) or rates.shape != shape + (6,):
            raise ValueError(f"Cauchy data must have shape {shape + (6,)}")
        self.origin = np.array([a[0] for a in self.axes])
        self.spacing = np.array([a[1] - a[0] for a in self.axes])
        for a, h in zip(self.axes, self.spacing):
            if not np.allclose(np.diff(a), h, rtol=1e-9, atol=0):
                raise ValueError("tabulated axes must be uniform")
        self.upper = np.array([a[-1] for a in self.axes])
        self.sphere_degree = sphere_degree
        self.order = spline_order
        data = np.concatenate([values, rates], axis=-1)
        self._coef = [
            ndimage.spline_filter(data[..., c], order=spline_order, mode="mirror")
            for c in range(12)
        ]

    def _interp(self, pts, comps):
        idx = ((pts - self.origin) / self.spacing).reshape(-1, 3).T
        out = np.stack([
            ndimage.map_coordinates(self._coef[c], idx, order=self.order,
                                    mode="mirror", prefilter=False)
            for c in comps
        ], axis=-1)
        return out.reshape(pts.shape[:-1] + (len(comps),))

    def _check_range(self, pts):
        margin = 2 * self.spacing
        if np.any(pts < self.origin + margin) or np.any(pts > self.upper - margin):
            raise TabulationRangeError(
                "backward light sphere leaves the tabulated region "
                f"[{self.origin.tolist()}, {self.upper.tolist()}]"
            )

    def cauchy_data(self, x):
        x = as_vec(x, "x")
        self._check_range(x)
        vals = self._interp(x, range(12))
        return (EMFieldValue(vals[..., 0:3], vals[..., 3:6]),
                EMFieldValue(vals[..., 6:9], vals[..., 9:12]))

    def evaluate(self, x, t, sphere_degree=None):
        x = as_vec(x, "x")
        shape = x.shape[:-1]
        X = x.reshape(-1, 3)
        if t == 0:
            return self.cauchy_data(x)[0]
        dirs, w = sphere_rule(sphere_degree or self.sphere_degree)
        pts = X[:, None, :] + abs(t) * dirs[None, :, :]
        self._check_range(pts)
        u0 = self._interp(pts, range(6))
        u1 = self._interp(pts, range(6, 12))
        # directional derivative along the outward normal, central difference
        # on the spline interpolant
        hstep = 1e-3 * self.spacing.min()
        du0 = (self._interp(pts + hstep * dirs, range(6))
               - self._interp(pts - hstep * dirs, range(6))) / (2 * hstep)
        mean = lambda u: np.einsum("m,nmc->nc", w, u)
        u = mean(u0) + abs(t) * mean(du0) + t * mean(u1)
        u = u.reshape(shape + (6,))
        return EMFieldValue(u[..., :3], u[..., 3:])

    def to_dict(self):
        return {"kind": self.kind, "shape": [len(a) for a in self.axes],
                "origin": self.origin.tolist(), "spacing": self.spacing.tolist()}


FreeFieldSpec = FreeField


def tabulate(spec, axes, **kw):
    """Sample the Cauchy data of ``spec`` on the grid spanned by ``axes``."""
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    f, fdot = spec.cauchy_data(grid)
    return TabulatedCauchyData(axes, f.as_array(), fdot.as_array(), **kw)


def propagate_free_field(spec, x, t, sphere_degree=None):
    """Value of the free field at (x, t).

    Analytic kinds are evaluated in closed form; tabulated data go through
    the spherical-mean Kirchhoff quadrature.
    """
    if isinstance(spec, TabulatedCauchyData):
        return spec.evaluate(x, t, sphere_degree=sphere_degree)
    return spec.evaluate(x, t)


# ---------------------------------------------------------------------------
# Initial data, shells, samples


@dataclass(frozen=True)
class InitialFieldSpec:
    """f0 = lambda f0^-[aux] + (1 - lambda) f0^+[aux] + free."""

    lam: float
    aux: Worldline
    free: FreeField = field(default_factory=ZeroField)
    q0: np.ndarray = None

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.q0 is not None:
            q0 = as_vec(self.q0, "q0")
            object.__setattr__(self, "q0", q0)
            if norm(self.aux.position(0.0) - q0) > 1e-12:
                raise ValueError("auxiliary trajectory must start at the declared charge position")

    def with_aux(self, aux):
        return InitialFieldSpec(self.lam, aux, self.free, self.q0)


def coulomb_initial_field(q0, mass=1.0):
    """The Coulomb initial field: a charge that rested at q0 for all t <= 0."""
    return InitialFieldSpec(1.0, static_worldline(q0, mass), ZeroField())


@dataclass(frozen=True)
class SingularShell:
    """Symbolic delta shell r_t^pm[q0, p0] supported on |x - q0| = |t|."""

    center: np.ndarray
    momentum: np.ndarray
    mass: float
    sign: Branch
    strength: float = 1.0

    def coefficient(self, x):
        """E and B coefficients of delta(|t| - |x - q0|) at x (any radius)."""
        x = as_vec(x, "x")
        d = x - self.center
        r = norm(d)[..., None]
        n0 = d / r
        v0 = relativistic_velocity(self.momentum, self.mass)
        s = self.sign.value
        denom = (1 + s * dot(n0, v0))[..., None] * r
        E = (n0 + s * v0) / denom
        B = -np.cross(n0, np.broadcast_to(v0, n0.shape)) / denom
        return EMFieldValue(self.strength * E, self.strength * B)

    def to_dict(self):
        return {"center": np.asarray(self.center).tolist(),
                "momentum": np.asarray(self.momentum).tolist(),
                "mass": self.mass, "sign": self.sign.name.lower(),
                "strength": self.strength}


def initial_shells(actual, init, t):
    """The pair r^s[q0, p0] - r^s[q~0, p~0] for evaluation time t."""
    br = Branch.for_time(t)
    q0 = actual.position(0.0)
    return [
        SingularShell(q0, actual.momentum(0.0), actual.mass, br, 1.0),
        SingularShell(init.aux.position(0.0), init.aux.momentum(0.0), init.aux.mass, br, -1.0),
    ]


def net_shell_coefficient(shells, x):
    total = shells[0].coefficient(x)
    for s in shells[1:]:
        total = total + s.coefficient(x)
    return total


class Region(enum.IntEnum):
    INSIDE_CONE = 0
    OUTSIDE_CONE = 1
    ON_CONE_BAND = 2


@dataclass(frozen=True)
class FieldSample:
    """Regular field, region labels and shell records for a batch of points.

    ``shells`` lists (shell, coefficient) pairs; coefficients are zero at
    points off the band.
    """

    regular: EMFieldValue
    region: np.ndarray
    shells: list
    time: float

    @property
    def on_band(self):
        return self.region == Region.ON_CONE_BAND

    @property
    def shell_count(self):
        return np.where(self.on_band, len(self.shells), 0)

    @property
    def net_shell(self):
        if not self.shells:
            return EMFieldValue.zeros(self.region.shape)
        total = self.shells[0][1]
        for _, c in self.shells[1:]:
            total = total + c
        return total


def _check_constraint(actual, init):
    gap = norm(actual.position(0.0) - init.aux.position(0.0))
    if gap > 1e-12:
        raise ValueError(
            f"auxiliary trajectory starts {gap:.3e} away from the charge; "
            "the initial field would violate the Maxwell constraint"
        )


def _lw_masked(traj, x, t, branch, mask):
    out_E = np.zeros(x.shape)
    out_B = np.zeros(x.shape)
    if np.any(mask):
        f = lw_field(traj, x[mask], t, branch)
        out_E[mask] = f.E
        out_B[mask] = f.B
    return EMFieldValue(out_E, out_B)


def evaluate_field(actual, init, x, t, band=SHELL_BAND, strict=True, expanded=False):
    """Field of a point charge on ``actual`` with initial field ``init``.

    Returns a :class:`FieldSample`.  With ``strict`` (default) a point within
    ``band`` of the sphere |x - q0| = |t| raises :class:`SingularFrontError`
    unless the two shells cancel there.  ``expanded`` assembles the same
    field from the longer seven-term form, as a cross-check.
    """
    _check_constraint(actual, init)
    x = as_vec(x, "x")
    shape = x.shape[:-1]
    X = x.reshape(-1, 3)
    t = float(t)
    T = abs(t)
    br = Branch.for_time(t)
    q0 = actual.position(0.0)
    dist = norm(X - q0)
    inside = dist <= T
    on_band = (np.abs(dist - T) <= band) & (T > 0)
    region = np.where(on_band, Region.ON_CONE_BAND,
                      np.where(inside, Region.INSIDE_CONE, Region.OUTSIDE_CONE)).astype(int)

    shells = initial_shells(actual, init, t)
    shell_records = []
    if np.any(on_band):
        coefs = []
        for sh in shells:
            c = sh.coefficient(X[on_band])
            E = np.zeros_like(X)
            B = np.zeros_like(X)
            E[on_band], B[on_band] = c.E, c.B
            coefs.append(EMFieldValue(E, B))
        net = coefs[0] + coefs[1]
        if strict and np.any(net.as_array() != 0):
            raise SingularFrontError(
                f"evaluation on the light front |x - q0| = {T} carries an uncancelled delta shell",
                shells=shells, time=t, radius=T, points=X[on_band],
            )
        shell_records = list(zip(shells, coefs))

    lam = init.lam
    aux = init.aux
    everywhere = np.ones(len(X), dtype=bool)
    f_ret = _lw_masked(aux, X, t, Branch.RETARDED, everywhere) if lam > 0 else EMFieldValue.zeros((len(X),))
    f_adv = _lw_masked(aux, X, t, Branch.ADVANCED, everywhere) if lam < 1 else EMFieldValue.zeros((len(X),))
    new_actual = _lw_masked(actual, X, t, br, inside)
    aux_branch = f_ret if br is Branch.RETARDED else f_adv
    if not ((br is Branch.RETARDED and lam > 0) or (br is Branch.ADVANCED and lam < 1)):
        aux_branch = _lw_masked(aux, X, t, br, inside)
    aux_inside = EMFieldValue(np.where(inside[:, None], aux_branch.E, 0.0),
                              np.where(inside[:, None], aux_branch.B, 0.0))
    free = init.free.evaluate(X, t)

    if not expanded:
        regular = (new_actual - aux_inside) + (f_ret * lam + f_adv * (1 - lam)) + free
    else:
        mask = inside[:, None]
        outside_part = f_ret * lam + f_adv * (1 - lam)
        inside_part = (new_actual + (f_ret - aux_inside) * lam
                       + (f_adv - aux_inside) * (1 - lam))
        regular = EMFieldValue(np.where(mask, inside_part.E, outside_part.E),
                               np.where(mask, inside_part.B, outside_part.B)) + free

    regular = EMFieldValue(regular.E.reshape(shape + (3,)), regular.B.reshape(shape + (3,)))
    shell_records = [(s, EMFieldValue(c.E.reshape(shape + (3,)), c.B.reshape(shape + (3,))))
                     for s, c in shell_records]
    return FieldSample(regular, region.reshape(shape), shell_records, t)


def evaluate_coulomb_case(actual, x, t, **kw):
    """evaluate_field with the Coulomb initial field of a charge resting at q0."""
    init = coulomb_initial_field(actual.position(0.0), actual.mass)
    return evaluate_field(actual, init, x, t, **kw)


def shell_surface_integral(shells, rho, x, t, n_polar=48, n_azimuth=64):
    """int over |y - q0| = |t| of rho(x - y) times the net shell coefficient."""
    x = as_vec(x, "x")
    T = abs(float(t))
    if T == 0 or not shells:
        return EMFieldValue.zeros(())
    q0 = np.asarray(shells[0].center)
    R = rho.radius
    d = x - q0
    D = float(norm(d))
    if abs(D - T) >= R:
        return EMFieldValue.zeros(())
    if D > 0:
        e3 = d / D
        mu_min = max(-1.0, (D * D + T * T - R * R) / (2 * D * T))
    else:
        e3 = np.array([0.0, 0.0, 1.0])
        mu_min = -1.0
    helper = np.array([1.0, 0, 0]) if abs(e3[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = np.cross(e3, helper)
    e1 /= norm(e1)
    e2 = np.cross(e3, e1)
    xs, ws = _gauss_legendre(n_polar)
    mu = mu_min + 0.5 * (1 - mu_min) * (xs + 1)
    wmu = 0.5 * (1 - mu_min) * ws
    phi = 2 * np.pi * np.arange(n_azimuth) / n_azimuth
    sin_t = np.sqrt(np.clip(1 - mu**2, 0, None))
    omega = (mu[:, None, None] * e3 + sin_t[:, None, None]
             * (np.cos(phi)[None, :, None] * e1 + np.sin(phi)[None, :, None] * e2))
    y = (q0 + T * omega).reshape(-1, 3)
    w = (wmu[:, None] * np.full(n_azimuth, 2 * np.pi / n_azimuth)[None, :]).ravel() * T * T
    w = w * rho.density(x - y)
    c = net_shell_coefficient(shells, y)
    return EMFieldValue(w @ c.E, w @ c.B)


def smeared_field(actual, init, rho, x, t, n_radial=None, sphere_degree=None):
    """(rho * f)(x) including the exact surface integral of any shells."""
    x = as_vec(x, "x")
    t = float(t)
    for name, traj in (("actual charge", actual), ("auxiliary charge", init.aux)):
        qt = traj.position(t)
        if norm(x - qt) < rho.radius:
            raise ObstructionError(
                f"{name} at {qt.tolist()} lies inside the mollifier support around {x.tolist()}",
                obstruction={"charge": name, "position": qt.tolist(), "time": t},
            )

    def g(pts):
        return evaluate_field(actual, init, pts, t, strict=False).regular.as_array()

    reg = mollifier_quadrature(rho, g, x, n_radial, sphere_degree)
    shell = shell_surface_integral(initial_shells(actual, init, t), rho, x, t)
    return EMFieldValue(reg[:3], reg[3:]) + shell


def qft_toy_expectation(g, q, x, t):
    """Vacuum expectation -g/(4 pi |x - q|) 1{|x - q| <= |t|} of the toy scalar field."""
    q = as_vec(q, "q")
    x = as_vec(x, "x")
    r = norm(x - q)
    if np.any(r == 0):
        from .core import SingularityError
        raise SingularityError("toy expectation value is singular at the source")
    return np.where(r <= abs(t), -g / (4 * np.pi * r), 0.0)


# ---------------------------------------------------------------------------
# Field-grid output

GRID_COLUMNS = ("t", "x", "y", "z", "Ex", "Ey", "Ez", "Bx", "By", "Bz", "region", "shell_count")


def field_grid_rows(t, points, field_value, region=None, shell_count=None):
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    E = np.asarray(field_value.E).reshape(-1, 3)
    B = np.asarray(field_value.B).reshape(-1, 3)
    n = len(pts)
    region = np.zeros(n, int) - 1 if region is None else np.asarray(region).reshape(-1)
    shell_count = np.zeros(n, int) if shell_count is None else np.asarray(shell_count).reshape(-1)
    rows = []
    for i in range(n):
        label = Region(int(region[i])).name.lower() if region[i] >= 0 else "free"
        rows.append([float(t), *map(float, pts[i]), *map(float, E[i]), *map(float, B[i]),
                     label, int(shell_count[i])])
    return rows


def write_field_grid(path, rows, fmt="csv"):
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(GRID_COLUMNS)
            for r in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    elif fmt == "json":
        with open(path, "w") as fh:
            for r in rows:
                fh.write(json.dumps(dict(zip(GRID_COLUMNS, r))) + "\n")
    else:
        raise ValueError(f"unknown grid format {fmt!r}")


def read_field_grid(path, fmt="csv"):
    """Rows back as lists with floats parsed; used for format round-trips."""
    rows = []
    with open(path, newline="") as fh:
        if fmt == "csv":
            reader = csv.reader(fh)
            next(reader)
            for r in reader:
                rows.append([float(v) for v in r[:10]] + [r[10], int(r[11])])
        else:
            for line in fh:
                d = json.loads(line)
                rows.append([d[c] for c in GRID_COLUMNS])
    return rows
