"""
How much does amplification buy over just repeating the measurement?

Gain of the pool-signal difference for a single 19F among 799 protons,
alongside simple averaging (sqrt N) and an idealized SWAP chain (min(N, m)).
Then the same curve with relaxation switched on, where the gain peaks and
rolls over.
"""
import numpy as np

from spinamp import mixing

m = 799
N = np.array([1, 5, 10, 40, 100, 200, 400, 800, 2000])

G = mixing.gain_closed_form(m, N)
print(f"{'N':>6} {'G':>10} {'sqrt(N)':>10} {'swap':>8}")
for n, g in zip(N, G):
    print(f"{n:>6} {g:>10.3f} {np.sqrt(n):>10.3f} {min(n, m):>8}")

print(f"\nsaturation m/2 = {mixing.saturation_gain(m)}")
print(f"N = m/2 = {m // 2}: G/m = {mixing.gain_closed_form(m, m // 2) / m:.4f} "
      f"vs (1 - 1/e)/2 = {(1 - np.exp(-1)) / 2:.4f}")

# with ~0.09% loss per cycle the relative gain has a maximum
eta = 0.9991
N = np.arange(1, 5001)
rel = mixing.amplified_difference(m, N, 0.12, eta).relative_gain
k = int(np.argmax(rel))
print(f"\neta = {eta}: relative gain at N=40 {rel[39]:.2f}, N=200 {rel[199]:.2f}")
print(f"best N = {N[k]}, relative gain {rel[k]:.1f}")
