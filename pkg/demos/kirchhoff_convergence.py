"""
Propagating gridded Cauchy data with spherical means
====================================================

A free field known only on a grid at t = 0 is propagated with Kirchhoff's
formula: the value at (x, t) is a combination of means over the sphere of
radius |t| about x.  The sphere means use Lebedev rules.  For a plane wave
with a short wavelength the error falls off rapidly with the rule degree
once the rule resolves the wave on the sphere.
"""

import numpy as np

from lightfront.propagation import PlaneWave, tabulate

x = np.array([[0.1, -0.2, 0.3], [-0.4, 0.0, 0.2]])
axes = [np.arange(-3, 3.0001, 0.025), np.arange(-4, 4.0001, 0.5), np.arange(-4, 4.0001, 0.5)]
for k, t in ((1.0, 1.0), (4.0, 2.0)):
    wave = PlaneWave([k, 0, 0], [0, 1, 0])
    table = tabulate(wave, axes)
    exact = wave.evaluate(x, t).as_array()
    print(f"k = {k}, t = {t}")
    for degree in (5, 11, 17, 23):
        err = np.abs(table.evaluate(x, t, sphere_degree=degree).as_array() - exact).max()
        print(f"   Lebedev degree {degree:2d}: max error {err:.1e}")
