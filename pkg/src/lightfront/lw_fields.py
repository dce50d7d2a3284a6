"""Advanced/retarded Lienard-Wiechert fields and closed-form special cases."""

import numpy as np

from .core import R_MIN, EMFieldValue, SingularityError, Units, as_vec, dot, norm, sphere_rule
from .kinematics import Branch, solve_lightcone_time

# switch larmor_power to e^2 a^2 / (6 pi eps0 c^3) by default
textbook_larmor = False


def lw_field_parts(lc):
    """Velocity (near, ~r^-2) and acceleration (far, ~r^-1) parts of the field.

    ``lc`` is a :class:`~lightfront.kinematics.LightConeData`, possibly
    synthetic.  Returns two :class:`EMFieldValue` for a unit charge.
    """
    s = lc.branch.value
    n, v, a, r = lc.n, lc.v, lc.a, lc.r[..., None]
    n_sv = n + s * v
    kappa = (1 + s * dot(n, v))[..., None]
    k3 = kappa**3
    e_near = n_sv * (1 - dot(v, v))[..., None] / (r**2 * k3)
    e_far = np.cross(n, np.cross(n_sv, a)) / (r * k3)
    # n x (n + s v) = s n x v, which keeps B exactly zero for a resting charge
    b_near = -np.cross(n, v) * ((1 - dot(v, v))[..., None] / (r**2 * k3))
    return (
        EMFieldValue(e_near, b_near),
        EMFieldValue(e_far, -s * np.cross(n, e_far)),
    )


def lw_field_from_lightcone(lc):
    near, far = lw_field_parts(lc)
    return near + far


def lw_field(traj, x, t, branch=Branch.RETARDED):
    """Lienard-Wiechert field f^pm_t[q, p](x) of a unit point charge.

    ``x`` may be a batch of points (..., 3).  Solver errors (singularity,
    range) propagate unchanged.
    """
    return lw_field_from_lightcone(solve_lightcone_time(traj, x, t, branch))


def coulomb_field(q0, x):
    x = as_vec(x, "x")
    d = x - as_vec(q0, "q0")
    r = norm(d)
    if np.any(r < R_MIN):
        raise SingularityError("Coulomb field requested at the charge position")
    E = d / r[..., None] ** 3
    return EMFieldValue(E, np.zeros_like(E))


def boosted_coulomb(q_now, v, x):
    """Field of a charge in uniform motion, built from a Lorentz boost.

    In the rest frame the separation (taken at equal lab time, so it is the
    present-position separation R) becomes R + (gamma - 1)(R.e)e and the
    field is pure Coulomb.  Transforming back gives E_par = E'_par,
    E_perp = gamma E'_perp and B = v x E.
    """
    q_now = as_vec(q_now, "q_now")
    v = as_vec(v, "v")
    x = as_vec(x, "x")
    speed = float(norm(v))
    if speed >= 1:
        raise ValueError("boosted_coulomb needs |v| < 1")
    R = x - q_now
    if np.any(norm(R) < R_MIN):
        raise SingularityError("boosted Coulomb field requested at the charge position")
    if speed == 0:
        E = R / norm(R)[..., None] ** 3
        return EMFieldValue(E, np.zeros_like(E))
    gamma = 1 / np.sqrt(1 - speed**2)
    e = v / speed
    R_par = dot(R, e)[..., None] * e
    R_rest = R + (gamma - 1) * R_par
    E_rest = R_rest / norm(R_rest)[..., None] ** 3
    E_rest_par = dot(E_rest, e)[..., None] * e
    E = E_rest_par + gamma * (E_rest - E_rest_par)
    return EMFieldValue(E, np.cross(np.broadcast_to(v, E.shape), E))


def larmor_power(a, charge, units=None, textbook=None):
    """Radiated power for acceleration ``a`` of total charge ``charge``.

    Default form: (2/3) charge^2 |a|^2 / (6 pi eps0 c^3), the leading 2/3
    included.  With ``textbook=True`` (or the module flag
    ``textbook_larmor``) the 2/3 is dropped, giving the usual Larmor power,
    which is (2/3) charge^2 a^2 in natural units.
    """
    units = units or Units.natural()
    if textbook is None:
        textbook = textbook_larmor
    a2 = float(np.sum(np.asarray(a, dtype=float) ** 2))
    c = units.speed_of_light
    base = charge**2 * a2 / (6 * np.pi * units.eps0 * c**3)
    return base if textbook else (2.0 / 3.0) * base


def poynting_power(traj, t, radius, center=(0, 0, 0), degree=59):
    """Power through a sphere (natural units, unit charge) from the retarded field."""
    dirs, w = sphere_rule(degree)
    pts = np.asarray(center, dtype=float) + radius * dirs
    f = lw_field(traj, pts, t)
    S = np.cross(f.E, f.B) / (4 * np.pi)
    return 4 * np.pi * radius**2 * np.sum(w * dot(S, dirs))
