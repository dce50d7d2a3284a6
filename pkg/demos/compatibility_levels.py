"""
How smooth is the field across the initial light cone?
======================================================

Whether the field jumps across the sphere |x - q0| = t depends on how well
the auxiliary history hidden in the initial field continues the actual
trajectory through t = 0.  Matching position and momentum removes the
delta shell.  Each further matching derivative buys one more order of
smoothness: a mismatch in acceleration leaves a step in the field, a
mismatch in the jerk leaves a kink, and so on.

Here three auxiliary histories are paired with one actual trajectory.
The classification from derivatives is compared with the jumps measured
directly on the field by straddling the cone.
"""

import numpy as np

from lightfront.compatibility import adapt_initial_field, check_c2, cone_jump_vector
from lightfront.kinematics import gaussian_polynomial_worldline
from lightfront.propagation import InitialFieldSpec

W = 0.7
actual_coeffs = [[0.2, 0.0, 0.0], [0.05, 0.1, 0.0], [0.02, -0.03, 0.04]]
actual = gaussian_polynomial_worldline([0, 0, 0], actual_coeffs, W)
pairs = {
    "acceleration differs": actual_coeffs[:1],
    "jerk differs": actual_coeffs[:2],
    "smooth continuation": actual_coeffs,
}
n = np.array([0.3, 0.8, -0.2])
n /= np.linalg.norm(n)
t = 0.6

for name, coeffs in pairs.items():
    init = InitialFieldSpec(1.0, gaussian_polynomial_worldline([0, 0, 0], coeffs, W))
    cls = check_c2(actual, init, order=2).smoothness_class
    jump = np.linalg.norm(cone_jump_vector(actual, init, n, t))
    djump = np.linalg.norm(cone_jump_vector(actual, init, n, t, deriv_order=1))
    print(f"{name:>22s}: class {cls!s:>6s}   |jump f| {jump:.2e}   |jump df/dr| {djump:.2e}")

# %%
# Repairing an incompatible initial field
# ---------------------------------------
# The adaptation splices the Taylor data of the actual motion into the
# auxiliary history on a short window before t = 0.
frozen = InitialFieldSpec(1.0, gaussian_polynomial_worldline([0, 0, 0], actual_coeffs[:1], W))
rep = adapt_initial_field(actual, frozen, window=0.1, order=1, report=True)
print("before:", rep.c2_before.smoothness_class, " after:", rep.c2_after.smoothness_class)
print("jump after adaptation:", np.linalg.norm(cone_jump_vector(actual, rep.init, n, t)))
