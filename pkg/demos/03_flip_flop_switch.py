"""
The field-cycling switch in a 19F-1H pair, computed exactly.

At low field the Zeeman difference is comparable to the dipolar coupling
and polarization sloshes fully between the spins.  At high field the same
coupling moves almost nothing: the maximum transfer follows
(d/2)^2 / ((d/2)^2 + delta^2).
"""
import numpy as np

from spinamp import dynamics as dyn
from spinamp.spin_system import FieldPoint, SpinSpecies, SpinSystem, classify_regime

H = SpinSpecies("H", 42.577)
F = SpinSpecies("F", 40.05)
d = 20e3
system = SpinSystem.star(F, H, 1, d)
rho0 = dyn.product_state([1.0, 0.0])

print(f"coupling d = {d / 1e3:.0f} kHz")
print(f"{'field G':>8} {'delta kHz':>10} {'regime':>18} {'max transfer':>13} {'analytic':>9}")
for field in (0.0, 10.0, 50.0, 100.0, 400.0, 4000.0):
    fp = FieldPoint(field)
    delta = F.larmor(fp) - H.larmor(fp)
    regime = classify_regime(system, fp)[(0, 1)]
    settings = dyn.HamiltonianSettings(fp, None, "force_on")
    period = 1 / np.hypot(delta, d / 2)
    tr = dyn.run_trajectory(system, rho0, [dyn.FreeSegment(2 * period, settings)], period / 400)
    transfer = 2 * tr.i_z[:, 0].max()
    analytic = (d / 2) ** 2 / ((d / 2) ** 2 + delta**2)
    print(f"{field:>8.0f} {delta / 1e3:>10.2f} {regime.name:>18} {transfer:>13.5f} {analytic:>9.5f}")
