"""
Shaped rf pulses and single-spin Bloch simulation.

Pulses are piecewise constant: sample k holds amplitude ``amplitudes[k]`` (kHz)
and phase ``phases[k]`` (rad) for ``sample_duration`` seconds.  In the frame
rotating at the carrier, a spin whose resonance sits ``offset`` kHz from the
nominal transmitter sees the effective field

    Omega = (w1 cos(phi), w1 sin(phi), offset - carrier_offset)

and its magnetization precesses as dM/dt = 2 pi Omega x M.  No relaxation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

HERMITE_BETA = 0.956
HERMITE_TAU_MAX = 2.5
DEFAULT_SAMPLES = 256


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ShapedPulse:
    amplitudes: np.ndarray      # kHz
    phases: np.ndarray          # rad
    sample_duration: float      # s
    carrier_offset: float = 0.0  # kHz

    def __post_init__(self):
        amp = np.atleast_1d(np.asarray(self.amplitudes, dtype=float)).copy()
        ph = np.broadcast_to(np.asarray(self.phases, dtype=float), amp.shape).copy()
        if amp.ndim != 1 or amp.size < 1:
            raise ValueError("pulse needs at least one sample")
        if not (np.all(np.isfinite(amp)) and np.all(np.isfinite(ph))):
            raise ValueError("pulse amplitudes and phases must be finite")
        if not self.sample_duration > 0:
            raise ValueError("sample_duration must be positive")
        amp.flags.writeable = False
        ph.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "phases", ph)

    @property
    def n_samples(self) -> int:
        return self.amplitudes.size

    @property
    def duration(self) -> float:
        return self.n_samples * self.sample_duration

    @property
    def times(self) -> np.ndarray:
        """Start time of each sample (s)."""
        return np.arange(self.n_samples) * self.sample_duration

    def with_carrier(self, carrier_offset: float) -> "ShapedPulse":
        return ShapedPulse(self.amplitudes, self.phases, self.sample_duration, carrier_offset)

    def scaled(self, c: float) -> "ShapedPulse":
        """Amplitudes times ``c``, duration divided by ``c``."""
        return ShapedPulse(self.amplitudes * c, self.phases, self.sample_duration / c,
                           self.carrier_offset)

    def rows(self):
        return zip(self.times, self.amplitudes, self.phases)


def constant_pulse(amplitude: float, duration: float, n_samples: int = 1,
                   phase: float = 0.0) -> ShapedPulse:
    """Rectangular pulse of ``amplitude`` kHz lasting ``duration`` s."""
    return ShapedPulse(np.full(n_samples, float(amplitude)), phase, duration / n_samples)


def hermite_envelope(n_samples: int, beta: float = HERMITE_BETA,
                     tau_max: float = HERMITE_TAU_MAX) -> np.ndarray:
    """(1 - beta tau^2) exp(-tau^2) at bin centres of [-tau_max, tau_max], peak |value| = 1."""
    tau = -tau_max + (np.arange(n_samples) + 0.5) * (2 * tau_max / n_samples)
    # force exact mirror symmetry of the grid
    tau = 0.5 * (tau - tau[::-1])
    env = (1 - beta * tau**2) * np.exp(-tau**2)
    return env / np.abs(env).max()


def hermite_shape(peak_amplitude: float, duration: float, n_samples: int = DEFAULT_SAMPLES,
                  beta: float = HERMITE_BETA, tau_max: float = HERMITE_TAU_MAX) -> ShapedPulse:
    """
    Hermite 180 pulse.

    The envelope A (1 - beta tau^2) exp(-tau^2) is sampled on ``n_samples``
    uniform bins of the window [-tau_max, tau_max] mapped onto ``duration``,
    and scaled so the largest sample equals ``peak_amplitude`` (kHz).
    """
    if not peak_amplitude > 0:
        raise ValueError("peak_amplitude must be positive")
    if n_samples < 16:
        raise ValueError("hermite_shape needs n_samples >= 16")
    if not duration > 0:
        raise ValueError("duration must be positive")
    env = hermite_envelope(n_samples, beta, tau_max)
    return ShapedPulse(peak_amplitude * env, 0.0, duration / n_samples)


def _rotate(M, axis, angle):
    # Rodrigues, right-handed; rows of M, axis, angle broadcast together
    c = np.cos(angle)[..., None]
    s = np.sin(angle)[..., None]
    kdotm = np.sum(axis * M, axis=-1)[..., None]
    return M * c + np.cross(axis, M) * s + axis * kdotm * (1 - c)


def _precess(amplitudes_hz, phases, dt, detuning_hz):
    """Propagate +z through the pulse for each row of (dt, detuning); returns (rows, 3)."""
    dt, detuning_hz = np.broadcast_arrays(np.atleast_1d(dt), np.atleast_1d(detuning_hz))
    rows = dt.size
    M = np.zeros((rows, 3))
    M[:, 2] = 1.0
    omega = np.empty((rows, 3))
    omega[:, 2] = detuning_hz
    for amp, phi in zip(amplitudes_hz, phases):
        omega[:, 0] = amp * np.cos(phi)
        omega[:, 1] = amp * np.sin(phi)
        w = np.linalg.norm(omega, axis=1)
        axis = omega / np.where(w > 0, w, 1.0)[:, None]
        M = _rotate(M, axis, 2 * np.pi * w * dt)
    return M


def bloch_response_grid(pulse: ShapedPulse, offsets) -> np.ndarray:
    """Final magnetization (len(offsets), 3) from +z for each offset in kHz."""
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    detuning = (offsets - pulse.carrier_offset) * 1e3
    return _precess(pulse.amplitudes * 1e3, pulse.phases, pulse.sample_duration, detuning)


def bloch_response(pulse: ShapedPulse, offset: float) -> np.ndarray:
    """Magnetization unit vector after ``pulse`` for a spin ``offset`` kHz from the transmitter."""
    return bloch_response_grid(pulse, [offset])[0]


@dataclass(frozen=True, eq=False)
class ExcitationProfile:
    """Residual longitudinal magnetization versus offset; doubles as a response-factor table."""

    offsets: np.ndarray      # kHz
    residual_mz: np.ndarray

    def __len__(self):
        return self.offsets.size

    def rows(self):
        return zip(self.offsets, self.residual_mz)

    def response_factor(self, offset: float) -> float:
        """f at ``offset`` by linear interpolation on the grid."""
        return float(np.interp(offset, self.offsets, self.residual_mz))


def excitation_profile(pulse: ShapedPulse, offsets) -> ExcitationProfile:
    offsets = np.asarray(offsets, dtype=float)
    if offsets.size == 0:
        raise ValueError("offset grid is empty")
    mz = bloch_response_grid(pulse, offsets)[:, 2]
    return ExcitationProfile(offsets.copy(), np.clip(mz, -1.0, 1.0))


SHAPES = {
    "constant": lambda peak, duration, n_samples=1, **kw: constant_pulse(peak, duration, n_samples),
    "hermite": hermite_shape,
}


def make_pulse(family: str, peak_amplitude: float, duration: float, **shape_kw) -> ShapedPulse:
    try:
        factory = SHAPES[family]
    except KeyError:
        raise ValueError(f"unknown pulse family {family!r}; choose from {sorted(SHAPES)}") from None
    return factory(peak_amplitude, duration, **shape_kw)


def calibrate_duration(family: str, peak_amplitude: float, max_cycles: float = 20.0,
                       tolerance: float = 1e-3, **shape_kw) -> float:
    """
    Shortest duration (s) at which the pulse inverts an on-resonance spin.

    The supported families are x-phase amplitude-modulated, so on resonance
    the net effect is a rotation about x and M_y changes sign exactly where
    M_z bottoms out.  The duration is scanned upward from zero until M_z < 0
    and M_y crosses zero, then refined with Brent's method on M_y.

    Raises CalibrationError if no duration up to ``max_cycles / peak``
    brings M_z within ``tolerance`` of -1.
    """

    def response(T):
        return bloch_response(make_pulse(family, peak_amplitude, T, **shape_kw), 0.0)

    # every duration shares the unit-duration envelope; scan them in one batch
    unit = make_pulse(family, peak_amplitude, 1.0, **shape_kw)
    t_max = max_cycles / (peak_amplitude * 1e3)
    grid = np.linspace(0.0, t_max, 801)
    M = _precess(unit.amplitudes * 1e3, unit.phases, grid * unit.sample_duration, 0.0)
    for k in range(1, grid.size):
        if M[k, 2] < 0 and np.sign(M[k, 1]) != np.sign(M[k - 1, 1]):
            T_star = optimize.brentq(lambda t: response(t)[1], grid[k - 1], grid[k],
                                     xtol=1e-15, rtol=1e-13)
            if response(T_star)[2] <= -1 + tolerance:
                return float(T_star)
    raise CalibrationError(
        f"{family} pulse at {peak_amplitude} kHz: no inversion within {t_max:.3g} s")
