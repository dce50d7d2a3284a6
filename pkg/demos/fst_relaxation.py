"""
Half retarded, half advanced
============================

With lambda = 1/2 each charge acts through the mean of its retarded and
advanced fields.  The force at time t then depends on the partner's past
and on its future, so the equations cannot be marched forward.  On a
finite window they are solved by waveform relaxation: guess the
trajectories, compute the fields, integrate, repeat.

The contraction factor per sweep is printed below.  Several starting
guesses are also tried to see whether they all end in the same solution.
"""

import numpy as np

from lightfront.dynamics import integrate_relaxation, relaxation_fixed_points
from lightfront.kinematics import Extension, TrajectoryHistory, inertial_worldline
from lightfront.scenarios import load_config, preset_config

cfg = load_config(preset_config("FSTWindow"))
res = integrate_relaxation(cfg.system, cfg.horizon, tol=1e-12)
print("sweeps:", res.iterations)
print("sup-norm change per sweep:", " ".join(f"{d:.1e}" for d in res.trace))
print("contraction ratios:", np.round(res.contraction_ratios, 3))

system = cfg.system
times = system.step * np.arange(int(round(cfg.horizon / system.step)) + 1)
guesses = [None] + [
    [TrajectoryHistory.sample(inertial_worldline(c.q0, [0, s, 0]), times,
                              past=Extension.prescribed(ini.aux), future=Extension("inertial"))
     for c, ini in zip(system.charges, system.initial_fields())]
    for s in (0.02, -0.05)
]
found, failed = relaxation_fixed_points(system, cfg.horizon, guesses, tol=1e-10)
print(f"{len(guesses)} starting guesses, {len(found)} distinct fixed point(s), {len(failed)} failures")
