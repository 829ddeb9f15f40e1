"""
Calibrate Hermite 180 pulses and look at how selective they are.

The duration is found numerically: scan until the on-resonance spin is
inverted, then refine.  The 45 kHz pulse is ~3x longer than the 140 kHz one
and correspondingly narrower in frequency.
"""
import numpy as np

from spinamp import pulse

offsets = np.arange(-400, 401, 20.0)
profiles = {}
for peak in (140.0, 45.0):
    T = pulse.calibrate_duration("hermite", peak)
    p = pulse.hermite_shape(peak, T)
    profiles[peak] = pulse.excitation_profile(p, offsets)
    print(f"{peak:5.0f} kHz peak: duration {T * 1e6:7.3f} us, "
          f"on-resonance Mz {pulse.bloch_response(p, 0.0)[2]:+.6f}")

print(f"\n{'offset kHz':>10} {'Mz 140':>9} {'Mz 45':>9}")
for off, a, b in zip(offsets, profiles[140.0].residual_mz, profiles[45.0].residual_mz):
    print(f"{off:>10.0f} {a:>9.4f} {b:>9.4f}")

p140 = pulse.hermite_shape(140.0, pulse.calibrate_duration("hermite", 140.0))
far = np.concatenate([np.arange(-1000, -299, 1.0), np.arange(300, 1001, 1.0)])
leak = 1 - pulse.excitation_profile(p140, far).residual_mz
print(f"\nworst 1 - Mz beyond 300 kHz at 140 kHz peak: {leak.max():.1e}")
