"""
Exact density-matrix dynamics for small S-I^m clusters.

States and operators are dense complex ``numpy`` arrays of dimension 2**n in
the computational (Zeeman product) basis, site 0 being the most significant
qubit.  Hamiltonians are in Hz; a time step t propagates with
U = exp(-2 pi i H t), built from a Hermitian eigendecomposition.

The Hamiltonian is written in a frame rotating at ``frame_frequency`` (common
to all spins):

    H = sum_k (gamma_k B - f_frame) Z_k
        + sum_{i<j} d_ij Z_i Z_j
        - sum_{i<j, flip-flop on} d_ij (X_i X_j + Y_i Y_j) / 2

Homonuclear flip-flop terms are always kept.  Heteronuclear ones follow
``flip_flop_mode``: ``auto`` asks ``classify_regime``, ``force_on`` keeps
them (suppression then comes only from the Zeeman offset), ``force_off`` is
the infinite-field secular limit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .output import write_csv
from .pulse import ShapedPulse
from .spin_system import FieldPoint, SpinSystem, classify_regime

MAX_SPINS = 10
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
IMAG_TOL = 1e-10

_PAULI_HALF = {
    "X": np.array([[0, 0.5], [0.5, 0]], dtype=complex),
    "Y": np.array([[0, -0.5j], [0.5j, 0]], dtype=complex),
    "Z": np.array([[0.5, 0], [0, -0.5]], dtype=complex),
}


class DynamicsError(RuntimeError):
    pass


class SystemTooLarge(DynamicsError):
    pass


class FlipFlop(str, enum.Enum):
    AUTO = "auto"
    FORCE_ON = "force_on"
    FORCE_OFF = "force_off"


@dataclass(frozen=True)
class HamiltonianSettings:
    field: FieldPoint = FieldPoint(0.0)
    frame_frequency: Optional[float] = None   # MHz; None -> abundant-species Larmor
    flip_flop_mode: FlipFlop = FlipFlop.AUTO
    threshold_ratio: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "flip_flop_mode", FlipFlop(self.flip_flop_mode))
        if not isinstance(self.field, FieldPoint):
            object.__setattr__(self, "field", FieldPoint(float(self.field)))

    def frame_hz(self, system: SpinSystem) -> float:
        if self.frame_frequency is None:
            return system.i_species.larmor(self.field)
        return self.frame_frequency * 1e6


# --- operators ------------------------------------------------------------

def _embed(n: int, k: int, op: np.ndarray) -> np.ndarray:
    left = np.eye(2**k)
    right = np.eye(2 ** (n - k - 1))
    return np.kron(np.kron(left, op), right)


def spin_operator(system: Union[SpinSystem, int], site_index: int, axis: str) -> np.ndarray:
    """Single-spin-1/2 operator on ``site_index``, identity on every other site."""
    n = system if isinstance(system, int) else system.n_spins
    if not 0 <= site_index < n:
        raise IndexError(f"site index {site_index} out of range for {n} spins")
    try:
        op = _PAULI_HALF[axis.upper()]
    except (KeyError, AttributeError):
        raise ValueError(f"axis must be X, Y or Z, got {axis!r}") from None
    return _embed(n, site_index, op)


def z_eigenvalues(n: int) -> np.ndarray:
    """(n, 2**n) table of the diagonal of Z_k, used to read <Z_k> off diag(rho)."""
    idx = np.arange(2**n)
    bits = (idx[None, :] >> (n - 1 - np.arange(n))[:, None]) & 1
    return 0.5 - bits


def total_z(n: int, sites: Sequence[int]) -> np.ndarray:
    return np.diag(z_eigenvalues(n)[list(sites)].sum(axis=0)).astype(complex)


def flip_flop_pairs(system: SpinSystem, settings: HamiltonianSettings) -> set:
    """Pairs (i, j), i < j, whose XY term is present under ``settings``."""
    n = system.n_spins
    pairs = set()
    regime = None
    for i in range(n):
        for j in range(i + 1, n):
            homo = system.sites[i].species.label == system.sites[j].species.label
            mode = settings.flip_flop_mode
            if homo or mode is FlipFlop.FORCE_ON:
                on = True
            elif mode is FlipFlop.FORCE_OFF:
                on = False
            else:
                if regime is None:
                    regime = classify_regime(system, settings.field, settings.threshold_ratio)
                on = regime[(i, j)].active
            if on:
                pairs.add((i, j))
    return pairs


def assemble_hamiltonian(system: SpinSystem, settings: HamiltonianSettings = HamiltonianSettings(),
                         max_spins: int = MAX_SPINS) -> np.ndarray:
    """Rotating-frame Hamiltonian (Hz) of ``system`` under ``settings``."""
    n = system.n_spins
    if n > max_spins:
        raise SystemTooLarge(f"system too large for exact engine: {n} spins > limit {max_spins}")
    zdiag = z_eigenvalues(n)
    frame = settings.frame_hz(system)
    offsets = np.array([s.species.larmor(settings.field) - frame for s in system.sites])
    d = system.couplings.d
    # Zeeman and ZZ parts are diagonal
    diag = offsets @ zdiag
    for i in range(n):
        for j in range(i + 1, n):
            if d[i, j] != 0:
                diag = diag + d[i, j] * zdiag[i] * zdiag[j]
    H = np.diag(diag).astype(complex)
    # (XX + YY)/2 = (S+ S- + S- S+)/4 flips an antiparallel pair with element 1/4
    dim = 2**n
    idx = np.arange(dim)
    for i, j in sorted(flip_flop_pairs(system, settings)):
        if d[i, j] == 0:
            continue
        bi = 1 << (n - 1 - i)
        bj = 1 << (n - 1 - j)
        anti = ((idx & bi) == 0) != ((idx & bj) == 0)
        src = idx[anti]
        H[src ^ bi ^ bj, src] += -d[i, j] / 4
    return H


# --- propagation ----------------------------------------------------------

def _check_hermitian(H: np.ndarray):
    scale = max(1.0, float(np.abs(H).max(initial=0.0)))
    if not np.allclose(H, H.conj().T, rtol=0, atol=HERMITIAN_TOL * scale):
        raise DynamicsError("Hamiltonian is not Hermitian")


@dataclass(frozen=True, eq=False)
class Eigensystem:
    """Cached Hermitian eigendecomposition, H = V diag(E) V^dagger."""

    energies: np.ndarray
    vectors: np.ndarray

    @classmethod
    def of(cls, H: np.ndarray) -> "Eigensystem":
        _check_hermitian(H)
        E, V = np.linalg.eigh(0.5 * (H + H.conj().T))
        return cls(E, V)

    def propagator(self, t: float) -> np.ndarray:
        phases = np.exp(-2j * np.pi * self.energies * t)
        return (self.vectors * phases) @ self.vectors.conj().T

    def to_eigenbasis(self, rho):
        return self.vectors.conj().T @ rho @ self.vectors

    def from_eigenbasis(self, rho_e):
        return self.vectors @ rho_e @ self.vectors.conj().T

    def evolve_eigenbasis(self, rho_e, t):
        ph = np.exp(-2j * np.pi * self.energies * t)
        return rho_e * np.outer(ph, ph.conj())


def propagator(H: np.ndarray, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    return Eigensystem.of(H).propagator(t)


def propagate(rho: np.ndarray, H: np.ndarray, t: float) -> np.ndarray:
    """rho(t) = U rho U^dagger with U = exp(-2 pi i H t), H in Hz."""
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    eig = Eigensystem.of(H)
    if t == 0:
        return rho.copy()
    return eig.from_eigenbasis(eig.evolve_eigenbasis(eig.to_eigenbasis(rho), t))


def _rf_operators(system: SpinSystem, target_species: str):
    idx = [k for k, s in enumerate(system.sites) if s.species.label == target_species]
    if not idx:
        raise KeyError(f"unknown species label {target_species!r}")
    n = system.n_spins
    fx = sum(spin_operator(n, k, "X") for k in idx)
    fy = sum(spin_operator(n, k, "Y") for k in idx)
    return fx, fy


def apply_pulse(rho: np.ndarray, system: SpinSystem, target_species: str, pulse: ShapedPulse,
                settings: HamiltonianSettings = HamiltonianSettings(),
                max_spins: int = MAX_SPINS) -> np.ndarray:
    """
    Propagate ``rho`` through ``pulse`` applied to every ``target_species`` site.

    Each sample adds w1 (cos(phi) Fx + sin(phi) Fy) to the internal Hamiltonian.
    The rf field is written in the frame of the carrier, which sits
    ``pulse.carrier_offset`` kHz above ``settings``' frame; the state is mapped
    back to the ``settings`` frame at the end.
    """
    fx, fy = _rf_operators(system, target_species)
    n = system.n_spins
    carrier = pulse.carrier_offset * 1e3
    frame_mhz = settings.frame_hz(system) * 1e-6 + pulse.carrier_offset * 1e-3
    carrier_settings = HamiltonianSettings(settings.field, frame_mhz,
                                           settings.flip_flop_mode, settings.threshold_ratio)
    H0 = assemble_hamiltonian(system, carrier_settings, max_spins)
    out = rho
    for amp, phi in zip(pulse.amplitudes * 1e3, pulse.phases):
        H = H0 + amp * (np.cos(phi) * fx + np.sin(phi) * fy)
        U = Eigensystem.of(H).propagator(pulse.sample_duration)
        out = U @ out @ U.conj().T
    if carrier != 0:
        fz_all = z_eigenvalues(n).sum(axis=0)
        # carrier frame -> settings frame: rotate by exp(-2 pi i c T Fz)
        ph = np.exp(-2j * np.pi * carrier * pulse.duration * fz_all)
        out = out * np.outer(ph, ph.conj())
    return out


def ideal_rotation(rho: np.ndarray, system: SpinSystem, target_species: str,
                   angle: float, phase: float = 0.0) -> np.ndarray:
    """Instantaneous rotation by ``angle`` (rad) about an in-plane axis on the target species."""
    fx, fy = _rf_operators(system, target_species)
    G = np.cos(phase) * fx + np.sin(phase) * fy
    E, V = np.linalg.eigh(G)
    U = (V * np.exp(-1j * angle * E)) @ V.conj().T
    return U @ rho @ U.conj().T


def expectation(rho: np.ndarray, O: np.ndarray) -> float:
    """Tr(rho O) as a real number."""
    if rho.shape != O.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {O.shape}")
    value = np.einsum("ij,ji->", rho, O)
    if abs(value.imag) > IMAG_TOL:
        raise DynamicsError(f"non-physical observable: imaginary part {value.imag:.3g}")
    return float(value.real)


# --- states ---------------------------------------------------------------

def product_state(polarizations: Sequence[float]) -> np.ndarray:
    """rho = tensor_k (1/2 + p_k Z_k), i.e. site k has polarization p_k."""
    rho = np.ones((1, 1), dtype=complex)
    for p in polarizations:
        if abs(p) > 1:
            raise ValueError("polarization must lie in [-1, 1]")
        rho = np.kron(rho, np.diag([(1 + p) / 2, (1 - p) / 2]).astype(complex))
    return rho


def basis_state(bits: Sequence[int]) -> np.ndarray:
    """|b_0 b_1 ...><...|, bit 0 = spin up."""
    n = len(bits)
    k = int("".join(str(int(b)) for b in bits), 2) if n else 0
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[k, k] = 1.0
    return rho


def check_density_matrix(rho: np.ndarray, tol: float = TRACE_TOL):
    """Raise DynamicsError unless rho is Hermitian, unit-trace and positive within ``tol``."""
    if not np.allclose(rho, rho.conj().T, rtol=0, atol=tol):
        raise DynamicsError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise DynamicsError(f"density matrix trace {np.trace(rho).real:.12g} != 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise DynamicsError("density matrix has negative eigenvalues")


def z_expectations(rho: np.ndarray) -> np.ndarray:
    """<Z_k> for every site k, read off the diagonal."""
    n = int(np.log2(rho.shape[0]))
    return z_eigenvalues(n) @ np.real(np.diag(rho))


def polarizations(rho: np.ndarray) -> np.ndarray:
    return 2 * z_expectations(rho)


# --- schedules and trajectories -------------------------------------------

@dataclass(frozen=True)
class FreeSegment:
    duration: float
    settings: HamiltonianSettings = HamiltonianSettings()

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError("segment duration must be >= 0")


@dataclass(frozen=True)
class PulseSegment:
    pulse: ShapedPulse
    target_species: str
    settings: HamiltonianSettings = HamiltonianSettings()

    @property
    def duration(self) -> float:
        return self.pulse.duration


EvolutionSchedule = Sequence[Union[FreeSegment, PulseSegment]]


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray           # s
    s_z: np.ndarray         # <S_Z>
    i_z: np.ndarray         # (samples, m) <I_kZ>
    final_state: np.ndarray = field(repr=False)

    @property
    def total_iz(self) -> np.ndarray:
        return self.i_z.sum(axis=1)

    @property
    def m(self) -> int:
        return self.i_z.shape[1]

    def header(self):
        return ["t_s", "S_z"] + [f"I{k + 1}_z" for k in range(self.m)] + ["total_Iz"]

    def rows(self):
        for k in range(self.t.size):
            yield [self.t[k], self.s_z[k], *self.i_z[k], self.total_iz[k]]

    def to_csv(self, precision: int = 9) -> str:
        return write_csv(self.header(), self.rows(), precision)


def run_trajectory(system: SpinSystem, rho0: np.ndarray, schedule: EvolutionSchedule,
                   sample_interval: float, max_spins: int = MAX_SPINS,
                   check_states: bool = False) -> Trajectory:
    """
    Evolve ``rho0`` through ``schedule`` and record z-observables.

    Samples are taken at t = 0 and at every multiple of ``sample_interval``
    that falls inside a free-evolution segment, plus at the end of the
    schedule.  Pulse segments are atomic: grid points strictly inside a pulse
    are skipped.  ``rho0`` is always validated; with ``check_states`` every
    sampled density matrix is too (costly for large n).
    """
    if not sample_interval > 0:
        raise ValueError("sample_interval must be positive")
    n = system.n_spins
    if n > max_spins:
        raise SystemTooLarge(f"system too large for exact engine: {n} spins > limit {max_spins}")
    zdiag = z_eigenvalues(n)
    s_idx, i_idx = system.s_index, system.i_indices
    times, zs = [], []

    def record(t, diag):
        times.append(t)
        zs.append(zdiag @ diag)

    rho = np.array(rho0, dtype=complex)
    check_density_matrix(rho)
    record(0.0, np.real(np.diag(rho)))
    t0 = 0.0
    eig_cache = {}
    for seg in schedule:
        if isinstance(seg, PulseSegment):
            rho = apply_pulse(rho, system, seg.target_species, seg.pulse, seg.settings, max_spins)
        else:
            eig = eig_cache.get(seg.settings)
            if eig is None:
                eig = eig_cache[seg.settings] = Eigensystem.of(
                    assemble_hamiltonian(system, seg.settings, max_spins))
            rho_e = eig.to_eigenbasis(rho)
            k0 = int(np.floor(t0 / sample_interval + 1e-9)) + 1
            k1 = int(np.floor((t0 + seg.duration) / sample_interval + 1e-9))
            Vc = eig.vectors.conj()
            for k in range(k0, k1 + 1):
                tau = k * sample_interval - t0
                if tau <= 0 or tau > seg.duration * (1 + 1e-12):
                    continue
                left = eig.vectors @ eig.evolve_eigenbasis(rho_e, tau)
                diag = np.real(np.einsum("ij,ij->i", left, Vc))
                if check_states:
                    check_density_matrix(left @ eig.vectors.conj().T)
                record(k * sample_interval, diag)
            rho = eig.from_eigenbasis(eig.evolve_eigenbasis(rho_e, seg.duration))
        t0 += seg.duration
        if check_states:
            check_density_matrix(rho)
    if t0 > 0 and abs(times[-1] - t0) > 1e-12 * max(1.0, t0):
        record(t0, np.real(np.diag(rho)))
    z = np.array(zs)
    return Trajectory(np.array(times), z[:, s_idx], z[:, i_idx], rho)
