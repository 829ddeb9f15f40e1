"""
Amplified frequency-response spectra.

Each offset gets its response factor from the Bloch simulation, and the pool
model turns that into a dip in the proton polarization.  More steps deepen
the dip; a stronger (shorter) pulse widens it.
"""
import numpy as np

from spinamp import mixing, pulse

offsets = np.arange(-300, 301, 2.0)
eta = 0.9991


def spectrum(peak, N):
    p = pulse.hermite_shape(peak, pulse.calibrate_duration("hermite", peak))
    f = pulse.excitation_profile(p, offsets).residual_mz
    return mixing.response_spectrum(offsets, f, 799, N, 0.12, eta)


for peak, N in ((45.0, 40), (45.0, 200), (140.0, 200)):
    sp = spectrum(peak, N)
    print(f"{peak:5.0f} kHz, N={N:>3}: depth {sp.depth:.4f}, "
          f"half-depth at {sp.half_depth_offset():.0f} kHz, baseline {sp.baseline:.4f}")

sp = spectrum(45.0, 200)
print("\noffset kHz  pool polarization")
for off, pol in list(sp.rows())[::10]:
    print(f"{off:>10.0f}  {pol:.5f}")
