"""
Releasing a charge from a Coulomb state
=======================================

A charge has rested at the origin for all negative times, so at t = 0 its
field is the Coulomb field.  At t = 0 it is given a momentum p0 and moves
on uniformly.  The field at a later time t then splits along the sphere
|x| = t:

* outside the sphere nothing has heard of the kick, and the Coulomb field
  survives unchanged;
* inside, the Lienard-Wiechert field of the moving charge has taken over,
  which for uniform motion is the boosted Coulomb field;
* on the sphere itself sits a delta shell whose strength is the difference
  of two shell coefficients, one for the actual momentum and one for the
  momentum encoded in the initial field.

The shell vanishes exactly when the two momenta agree.
"""

import numpy as np

from lightfront.kinematics import inertial_worldline
from lightfront.lw_fields import boosted_coulomb, coulomb_field
from lightfront.propagation import Region, evaluate_coulomb_case
from lightfront.scenarios import scenario_coulomb_front

t = 1.0
p0 = np.array([0.3, 0.0, 0.0])
actual = inertial_worldline([0, 0, 0], p0)

# %%
# Inside and outside the cone
# ---------------------------
inside = np.array([[0.2, 0.4, 0.0], [-0.5, 0.1, 0.3]])
outside = np.array([[1.5, 0.0, 0.0], [0.0, -2.0, 1.0]])
f_in = evaluate_coulomb_case(actual, inside, t).regular
f_out = evaluate_coulomb_case(actual, outside, t).regular
ref_in = boosted_coulomb(actual.position(t), actual.velocity(t), inside)
print("inside:  max |E - boosted Coulomb| =", np.abs(f_in.E - ref_in.E).max())
print("outside: max |E - static Coulomb|  =", np.abs(f_out.E - coulomb_field([0, 0, 0], outside).E).max())

# %%
# A slice through the front
# -------------------------
# The scenario evaluates a 41 x 41 grid in the plane z = 0 without raising
# on the front and reports the net shell coefficient along the circle |x| = t.
ds = scenario_coulomb_front(p0=p0, t=t)
labels, counts = np.unique(ds.sample.region, return_counts=True)
for lab, c in zip(labels, counts):
    print(f"{Region(lab).name:>14s}: {c} grid points")
print("largest net shell coefficient:", ds.shell_report()["max_net_coefficient"])

# %%
# The shell grows linearly with the momentum mismatch
# ---------------------------------------------------
for px in (0.0, 0.01, 0.1, 0.3):
    rep = scenario_coulomb_front(p0=(px, 0, 0), t=t, n=5).shell_report()
    print(f"p0 = {px:4.2f}: max shell coefficient {rep['max_net_coefficient']:.4e}")
