"""
Pool model of spin amplification.

One amplification step acts on the polarization of the rare S spin (eps_S)
and the average polarization of its m abundant partners (eps_I):

1. the pulse U scales eps_S by the response factor f (f = -1: perfect NOT,
   f = +1: no pulse);
2. the low-field mixing drives both towards the uniform value
   u = (m eps_I + f eps_S) / (m + 1), each moving a fraction q of the way
   (q = 1: complete mixing).  Total z-polarization is conserved;
3. relaxation over the cycle multiplies both by the survival factor eta.

With f = -1, q = 1 and eta = 1 the pool decays as eps0 r^N with
r = (m - 1)/(m + 1), and the gain of the pool-signal difference over the
direct S-signal difference is G = (m/2)(1 - r^N).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class PoolState:
    eps_S: float
    eps_I: float
    m: int
    step: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if abs(self.eps_S) > 1 + 1e-12 or abs(self.eps_I) > 1 + 1e-12:
            raise ValueError("polarizations must lie in [-1, 1]")
        if self.step < 0:
            raise ValueError("step must be >= 0")

    @classmethod
    def initial(cls, m: int, eps0: float) -> "PoolState":
        return cls(eps0, eps0, m, 0)

    @property
    def total(self) -> float:
        """m eps_I + eps_S, proportional to the total z magnetization."""
        return self.m * self.eps_I + self.eps_S


@dataclass(frozen=True)
class StepParams:
    f: float = -1.0
    eta: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if not -1 <= self.f <= 1:
            raise ValueError("response factor f must lie in [-1, 1]")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if not 0 <= self.q <= 1:
            raise ValueError("q must lie in [0, 1]")


def mix(state: PoolState, p: StepParams) -> PoolState:
    """Pulse and mixing stages of one step, without relaxation."""
    s = p.f * state.eps_S
    u = (state.m * state.eps_I + s) / (state.m + 1)
    return replace(state, eps_S=s + p.q * (u - s), eps_I=state.eps_I + p.q * (u - state.eps_I))


def step(state: PoolState, p: StepParams) -> PoolState:
    """One full cycle: pulse, mixing, then relaxation by eta."""
    mixed = mix(state, p)
    return PoolState(p.eta * mixed.eps_S, p.eta * mixed.eps_I, state.m, state.step + 1)


def iterate(state: PoolState, p: StepParams, n_steps: int) -> list:
    """States after 0..n_steps steps."""
    out = [state]
    for _ in range(n_steps):
        state = step(state, p)
        out.append(state)
    return out


def _one_minus_r_pow(m, N):
    m = np.asarray(m, dtype=float)
    N = np.asarray(N, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -np.expm1(N * np.log1p(-2.0 / (m + 1)))
    return np.where(m == 1, np.where(N == 0, 0.0, 1.0), val)


def gain_closed_form(m, N):
    """G = (m/2) [1 - ((m-1)/(m+1))^N]; broadcasts over array arguments."""
    m_arr = np.asarray(m)
    N_arr = np.asarray(N)
    if np.any(m_arr < 1) or np.any(N_arr < 0):
        raise ValueError("need m >= 1 and N >= 0")
    G = 0.5 * m_arr * _one_minus_r_pow(m_arr, N_arr)
    return G.item() if G.ndim == 0 else G


def saturation_gain(m) -> float:
    return 0.5 * m


def half_m_gain_asymptote(m):
    """m (1 - 1/e) / 2, the large-m gain at N = m/2."""
    return 0.5 * m * (1 - np.exp(-1.0))


def direct_repetition_gain(N):
    """SNR gain of simply repeating the direct measurement N times."""
    return np.sqrt(N)


def ideal_swap_gain(m, N):
    """Selective SWAPs into fresh I spins: one unit of gain per SWAP, up to m."""
    return np.minimum(N, m)


@dataclass(frozen=True, eq=False)
class GainCurve:
    N: np.ndarray
    G: np.ndarray
    m: int

    def rows(self):
        return zip(self.N, self.G)


def gain_curve(m: int, n_max: int) -> GainCurve:
    N = np.arange(n_max + 1)
    return GainCurve(N, np.asarray(gain_closed_form(m, N), dtype=float), m)


class Difference(NamedTuple):
    delta_P: np.ndarray | float
    relative_gain: np.ndarray | float


def amplified_difference(m, N, eps0: float, eta: float) -> Difference:
    """
    Pool polarization with no pulse minus pool polarization with U = NOT after N steps.

    delta_P = eps0 eta^N (1 - r^N); relative_gain = delta_P(N) / delta_P(1)
    = eta^(N-1) (1 - r^N) / (1 - r).
    """
    if not 0 < eps0 <= 1:
        raise ValueError("eps0 must lie in (0, 1]")
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    N = np.asarray(N, dtype=float)
    m = np.asarray(m, dtype=float)
    one_minus = _one_minus_r_pow(m, N)
    delta_P = eps0 * eta**N * one_minus
    rel = eta ** (N - 1) * one_minus * (m + 1) / 2.0
    if delta_P.ndim == 0:
        return Difference(float(delta_P), float(rel))
    return Difference(delta_P, rel)


def pool_after(f, m, N, eps0: float, eta: float = 1.0):
    """Pool polarization after N full-mixing steps with a fixed response factor f."""
    f = np.asarray(f, dtype=float)
    return eps0 * (eta * (m + f) / (m + 1)) ** N


@dataclass(frozen=True, eq=False)
class Spectrum:
    offsets: np.ndarray          # kHz
    pool_polarization: np.ndarray
    baseline: float              # no-pulse value eps0 eta^N

    def rows(self):
        return zip(self.offsets, self.pool_polarization)

    @property
    def dip(self) -> np.ndarray:
        return self.baseline - self.pool_polarization

    @property
    def depth(self) -> float:
        return float(self.dip.max())

    def half_depth_offset(self) -> float:
        """Smallest |offset| beyond the deepest point at which the dip falls to half its depth."""
        dip = self.dip
        k0 = int(np.argmax(dip))
        half = 0.5 * dip[k0]
        order = np.argsort(np.abs(self.offsets - self.offsets[k0]), kind="stable")
        for k in order:
            if dip[k] <= half:
                return float(abs(self.offsets[k] - self.offsets[k0]))
        return float("inf")


def response_spectrum(offsets, f_values, m: int, N: int, eps0: float, eta: float = 1.0) -> Spectrum:
    """Pool polarization after N steps for each offset's response factor."""
    f_values = np.asarray(f_values, dtype=float)
    if np.any(np.abs(f_values) > 1 + 1e-12):
        raise ValueError("response factors must lie in [-1, 1]")
    pool = pool_after(np.clip(f_values, -1, 1), m, N, eps0, eta)
    return Spectrum(np.asarray(offsets, dtype=float), pool, eps0 * eta**N)


def signal_ratio(delta_P_pool: float, m: int, gamma_I: float, gamma_S: float,
                 reference_polarization: float) -> float:
    """
    Pool-signal difference over the direct S-signal difference.

    Inductive signal is taken proportional to spin count x polarization x gamma^2
    (magnetic moment times detection frequency).  The reference is the
    difference between an S spin at +reference_polarization and one inverted
    to -reference_polarization, hence the factor 2.
    """
    if min(delta_P_pool, m, reference_polarization) <= 0 or gamma_I == 0 or gamma_S == 0:
        raise ValueError("signal_ratio needs positive inputs")
    return m * delta_P_pool * gamma_I**2 / (2 * reference_polarization * gamma_S**2)

