"""
How strong is a light front from a charge cluster?
==================================================

A cluster of 1e13 electrons accelerated at 1e17 m/s^2 sends out a front.
At 100 m it reaches a second cluster whose charge is spread over 1 cm and
moves at 1e4 m/s.  The estimate below gives the transverse field in the
front, the acceleration it causes, the Larmor power the second cluster
radiates, and the time the front needs to sweep over it.

The same arithmetic in natural units, converted back, agrees to rounding.
"""

import lightfront.lw_fields as lw
from lightfront.scenarios import paper_example_to_si, scenario_paper_example

si = scenario_paper_example("si")
nat = paper_example_to_si(scenario_paper_example("natural"))
for key, unit in (("E1x", "V/m"), ("a2", "m/s^2"), ("P2", "W"), ("rise_time", "s")):
    a, b = getattr(si, key), getattr(nat, key)
    print(f"{key:>9s} = {a: .6e} {unit:<6s} (natural route {b: .6e}, rel. diff {abs(a - b) / abs(a):.1e})")

# %%
# The radiated power keeps the 2/3 prefactor by default.  The textbook
# Larmor formula drops it, which raises the power by a factor 3/2.
lw.textbook_larmor = True
print("textbook Larmor power:", f"{scenario_paper_example('si').P2:.4f} W")
lw.textbook_larmor = False
