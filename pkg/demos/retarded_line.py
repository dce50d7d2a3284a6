"""
Two charges on a line, with and without a kick
==============================================

Two like charges start at rest at x = -0.5 and x = +0.5 and repel each
other through retarded fields.  Their initial fields say they have always
been at rest there.

``compatible``
    Nothing contradicts the initial fields.  The run reaches the horizon.
``kicked``
    Charge 1 gets a sideways momentum that its initial field does not know
    about.  A delta shell leaves its initial position at the speed of
    light.  When charge 2 meets it, the Lorentz force is undefined and the
    point-charge integration stops with the crossing time t*.
``smeared``
    The same kick with charges smeared over balls of radius 0.05.  The
    shell is now felt as a short transverse pulse.
``adapted``
    The same kick, with the initial field of charge 1 spliced so that it
    agrees with the kicked motion.  No front is left.
"""

import numpy as np

from lightfront.scenarios import scenario_two_body

for variant in ("compatible", "kicked", "smeared", "adapted"):
    out = scenario_two_body("RetardedLine", variant)
    ev = out.events()
    crossings = [e for e in ev["events"] if isinstance(e, dict) and e.get("event") == "front_crossing"]
    line = f"{variant:>10s}: reason {ev['reason']:<15s} t_end {ev['t_end']:.2f}"
    for c in crossings:
        line += f"   front crossing t* = {c['t_star']:.4f} (singular: {c['singular']})"
    print(line)
    if variant == "smeared":
        h = out.histories[1]
        ay = h.a[:, 1]
        on = h.t[np.abs(ay) > 1e-10]
        print(f"{'':>12s}transverse pulse on charge 2 from t = {on[0]:.2f}, peak {ay.min():.3f}")
