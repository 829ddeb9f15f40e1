"""
Spin species, S-I^m cluster geometry and dipolar couplings.

Units
-----
- Gyromagnetic ratios in MHz/T (cycles, not angular).
- Couplings in Hz, positions in angstrom, fields in gauss.

Coupling convention
-------------------
The pair Hamiltonian used throughout the package is the secular dipolar form

    H_ij = d_ij * (Z_i Z_j - (X_i X_j + Y_i Y_j) / 2)

with spin-1/2 operators (eigenvalues +-1/2).  Rewriting the textbook secular
dipolar Hamiltonian in this shape gives

    d_ij = (mu0 / 4 pi) * gamma_i * gamma_j * hbar * (1 - 3 cos^2 theta) / r^3

(angular gammas, result divided by 2 pi to land in Hz), where theta is the
angle between the internuclear vector and the static field.  Two protons
2 angstrom apart along the field couple with d ~ -30 kHz.

System file format
------------------
Plain text, one directive per line, ``#`` starts a comment::

    species H 42.577
    species F 40.05
    F S  0.0 0.0 0.0        # site: <species> <role> [x y z]
    H I  0.0 0.0 2.5
    H I  2.4 0.0 1.0
    coupling 0 1 -4500      # optional: <i> <j> <d_hz>, 0-based site indices
    field_axis 0 0 1        # optional, default +z

Explicit couplings take precedence over geometry.  Pairs not listed in any
``coupling`` line are derived from coordinates when all sites have them,
zero otherwise.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import constants as const

GAUSS_PER_TESLA = 1.0e4

#: Common spin-1/2 nuclei, MHz/T.
GAMMA_MHZ_PER_T = {
    "1H": 42.577,
    "19F": 40.05,
    "13C": 10.708,
    "15N": -4.316,
    "31P": 17.235,
}


class SpinSystemError(ValueError):
    """Invalid spin-system definition."""


@dataclass(frozen=True)
class SpinSpecies:
    label: str
    gamma: float  # MHz/T

    def __post_init__(self):
        if not self.label or any(c.isspace() for c in self.label):
            raise SpinSystemError(f"invalid species label {self.label!r}")
        if not np.isfinite(self.gamma) or self.gamma == 0:
            raise SpinSystemError(f"species {self.label}: gyromagnetic ratio must be finite and nonzero")

    def larmor(self, field: "FieldPoint") -> float:
        """Larmor frequency in Hz at ``field``."""
        return self.gamma * 1e6 * field.tesla


@dataclass(frozen=True)
class SpinSite:
    species: SpinSpecies
    role: str = "I"
    position: Optional[tuple] = None

    def __post_init__(self):
        if self.role not in ("S", "I"):
            raise SpinSystemError(f"site role must be 'S' or 'I', got {self.role!r}")
        if self.position is not None:
            pos = tuple(float(x) for x in self.position)
            if len(pos) != 3 or not all(np.isfinite(pos)):
                raise SpinSystemError("site position must be a finite 3-vector")
            object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class FieldPoint:
    strength: float  # gauss

    def __post_init__(self):
        if not (self.strength >= 0 and np.isfinite(self.strength)):
            raise SpinSystemError(f"field strength must be finite and >= 0, got {self.strength}")

    @property
    def tesla(self) -> float:
        return self.strength / GAUSS_PER_TESLA


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Symmetric pairwise couplings in Hz with zero diagonal."""

    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise SpinSystemError("coupling matrix must be square")
        if not np.all(np.isfinite(d)):
            raise SpinSystemError("coupling matrix has non-finite entries")
        if not np.array_equal(d, d.T):
            raise SpinSystemError("coupling matrix must be symmetric")
        if np.any(np.diag(d) != 0):
            raise SpinSystemError("coupling matrix must have zero diagonal")
        d.flags.writeable = False
        object.__setattr__(self, "d", d)

    @property
    def size(self) -> int:
        return self.d.shape[0]

    def __getitem__(self, ij):
        return self.d[ij]

    def __eq__(self, other):
        return isinstance(other, CouplingMatrix) and np.array_equal(self.d, other.d)

    __hash__ = None

    @classmethod
    def from_pairs(cls, n: int, pairs: dict) -> "CouplingMatrix":
        d = np.zeros((n, n))
        for (i, j), value in pairs.items():
            if i == j:
                raise SpinSystemError(f"self-coupling on site {i}")
            d[i, j] = d[j, i] = value
        return cls(d)


@dataclass(frozen=True)
class SpinSystem:
    """An S-I^m cluster: exactly one rare S site plus m >= 1 abundant I sites."""

    sites: tuple
    couplings: CouplingMatrix
    field_axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        sites = tuple(self.sites)
        object.__setattr__(self, "sites", sites)
        n_s = sum(1 for s in sites if s.role == "S")
        if n_s != 1:
            raise SpinSystemError(f"exactly one S site required, found {n_s}")
        if len(sites) < 2:
            raise SpinSystemError("at least one I site required (m >= 1)")
        if self.couplings.size != len(sites):
            raise SpinSystemError(
                f"coupling matrix is {self.couplings.size}x{self.couplings.size} "
                f"but system has {len(sites)} sites")
        with_pos = [s.position is not None for s in sites]
        if any(with_pos) and not all(with_pos):
            raise SpinSystemError("positions must be given for all sites or for none")
        by_label = {}
        for s in sites:
            other = by_label.setdefault(s.species.label, s.species)
            if other != s.species:
                raise SpinSystemError(f"species label {s.species.label!r} used with two gyromagnetic ratios")

    @property
    def n_spins(self) -> int:
        return len(self.sites)

    @property
    def m(self) -> int:
        return self.n_spins - 1

    @property
    def s_index(self) -> int:
        return next(k for k, s in enumerate(self.sites) if s.role == "S")

    @property
    def i_indices(self) -> list:
        return [k for k, s in enumerate(self.sites) if s.role == "I"]

    @property
    def species(self) -> dict:
        """Species by label, in first-appearance order."""
        out = {}
        for s in self.sites:
            out.setdefault(s.species.label, s.species)
        return out

    @property
    def s_species(self) -> SpinSpecies:
        return self.sites[self.s_index].species

    @property
    def i_species(self) -> SpinSpecies:
        return self.sites[self.i_indices[0]].species

    def has_geometry(self) -> bool:
        return self.sites[0].position is not None

    @classmethod
    def from_couplings(cls, sites: Sequence[SpinSite], d) -> "SpinSystem":
        return cls(tuple(sites), CouplingMatrix(np.asarray(d, dtype=float)))

    @classmethod
    def from_geometry(cls, sites: Sequence[SpinSite], field_axis=(0.0, 0.0, 1.0),
                      overrides: Optional[dict] = None) -> "SpinSystem":
        """Build couplings from site positions; ``overrides`` maps (i, j) -> d_hz."""
        sites = tuple(sites)
        axis = _unit(field_axis)
        n = len(sites)
        if any(s.position is None for s in sites):
            raise SpinSystemError("from_geometry needs positions on every site")
        d = np.zeros((n, n))
        for i, j in itertools.combinations(range(n), 2):
            d[i, j] = d[j, i] = dipolar_coupling(
                sites[i].position, sites[j].position,
                sites[i].species.gamma, sites[j].species.gamma, axis)
        for (i, j), value in (overrides or {}).items():
            d[i, j] = d[j, i] = value
        return cls(sites, CouplingMatrix(d), tuple(axis))

    @classmethod
    def star(cls, s_species: SpinSpecies, i_species: SpinSpecies, m: int,
             d_is, d_ii=0.0) -> "SpinSystem":
        """S at site 0 coupled to m I spins; ``d_is`` scalar or length-m, ``d_ii`` scalar or (m, m)."""
        sites = [SpinSite(s_species, "S")] + [SpinSite(i_species, "I") for _ in range(m)]
        d = np.zeros((m + 1, m + 1))
        d[0, 1:] = d[1:, 0] = np.broadcast_to(np.asarray(d_is, dtype=float), (m,))
        ii = np.broadcast_to(np.asarray(d_ii, dtype=float), (m, m)).copy()
        ii = np.triu(ii, 1)
        d[1:, 1:] = ii + ii.T
        return cls.from_couplings(sites, d)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if v.shape != (3,) or norm == 0:
        raise SpinSystemError("field axis must be a nonzero 3-vector")
    return v / norm


def dipolar_coupling(pos_i, pos_j, gamma_i: float, gamma_j: float,
                     field_axis=(0.0, 0.0, 1.0)) -> float:
    """
    Secular dipolar coupling constant d (Hz) between two spins.

    Parameters
    ----------
    pos_i, pos_j : 3-vectors in angstrom.
    gamma_i, gamma_j : gyromagnetic ratios in MHz/T.
    field_axis : unit vector along the static field.

    Returns
    -------
    float
        d such that the pair Hamiltonian is d (ZZ - (XX + YY)/2).
    """
    axis = np.asarray(field_axis, dtype=float)
    if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise SpinSystemError("field_axis must be a normalized 3-vector")
    rvec = (np.asarray(pos_j, dtype=float) - np.asarray(pos_i, dtype=float)) * 1e-10
    r = np.linalg.norm(rvec)
    if r == 0:
        raise SpinSystemError("degenerate geometry: coincident spin positions")
    cos_t = np.dot(rvec, axis) / r
    # gamma product first so that swapping i and j is bit-exact
    g_prod = (2 * np.pi * gamma_i * 1e6) * (2 * np.pi * gamma_j * 1e6)
    prefactor = const.mu_0 / (4 * np.pi) * g_prod * const.hbar / r**3
    return float(prefactor * (1 - 3 * cos_t**2) / (2 * np.pi))


class Regime(enum.Enum):
    FLIP_FLOP_ACTIVE = "flip_flop_active"
    FLIP_FLOP_SUPPRESSED = "flip_flop_suppressed"

    @property
    def active(self) -> bool:
        return self is Regime.FLIP_FLOP_ACTIVE


def classify_regime(system: SpinSystem, field: FieldPoint,
                    threshold_ratio: float = 1.0) -> dict:
    """
    Flag every spin pair (i < j) as flip-flop active or suppressed at ``field``.

    A heteronuclear pair is active iff |nu_i - nu_j| <= threshold_ratio * |d_ij|
    with nu = gamma * B.  Homonuclear pairs are always active.
    """
    if not threshold_ratio > 0:
        raise ValueError("threshold_ratio must be positive")
    out = {}
    for i, j in itertools.combinations(range(system.n_spins), 2):
        si, sj = system.sites[i].species, system.sites[j].species
        if si.label == sj.label:
            out[(i, j)] = Regime.FLIP_FLOP_ACTIVE
            continue
        delta = abs(si.larmor(field) - sj.larmor(field))
        coupling = abs(system.couplings[i, j])
        active = delta <= threshold_ratio * coupling
        out[(i, j)] = Regime.FLIP_FLOP_ACTIVE if active else Regime.FLIP_FLOP_SUPPRESSED
    return out


# --- text ingestion -------------------------------------------------------

def parse_system_text(text: str, source: str = "<system>") -> SpinSystem:
    """Parse the line-oriented system format documented at module level."""
    species = {}
    raw_sites = []  # (lineno, label, role, pos)
    couplings = {}
    axis = (0.0, 0.0, 1.0)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        where = f"{source}:{lineno}"
        try:
            if tok[0] == "species":
                if len(tok) != 3:
                    raise SpinSystemError("expected 'species <label> <gamma_mhz_per_t>'")
                if tok[1] in species:
                    raise SpinSystemError(f"duplicate species {tok[1]!r}")
                species[tok[1]] = SpinSpecies(tok[1], float(tok[2]))
            elif tok[0] == "coupling":
                if len(tok) != 4:
                    raise SpinSystemError("expected 'coupling <i> <j> <d_hz>'")
                i, j = int(tok[1]), int(tok[2])
                if i == j:
                    raise SpinSystemError("coupling of a site with itself")
                couplings[(min(i, j), max(i, j))] = (float(tok[3]), lineno)
            elif tok[0] == "field_axis":
                if len(tok) != 4:
                    raise SpinSystemError("expected 'field_axis <x> <y> <z>'")
                axis = tuple(_unit([float(t) for t in tok[1:]]))
            else:
                if len(tok) not in (2, 5):
                    raise SpinSystemError("expected '<species> <role> [x y z]'")
                pos = tuple(float(t) for t in tok[2:]) if len(tok) == 5 else None
                raw_sites.append((lineno, tok[0], tok[1], pos))
        except (ValueError, IndexError) as exc:
            raise SpinSystemError(f"{where}: {exc}") from None

    if not species:
        raise SpinSystemError(f"{source}: missing key 'species' (no species lines)")
    sites = []
    for lineno, label, role, pos in raw_sites:
        if label not in species:
            raise SpinSystemError(f"{source}:{lineno}: missing species {label!r}")
        try:
            sites.append(SpinSite(species[label], role, pos))
        except SpinSystemError as exc:
            raise SpinSystemError(f"{source}:{lineno}: {exc}") from None
    n = len(sites)
    for (i, j), (_, lineno) in couplings.items():
        if not (0 <= i < n and 0 <= j < n):
            raise SpinSystemError(f"{source}:{lineno}: coupling index out of range (0..{n - 1})")
    overrides = {ij: v for ij, (v, _) in couplings.items()}
    try:
        if n and all(s.position is not None for s in sites):
            return SpinSystem.from_geometry(sites, axis, overrides)
        return SpinSystem(tuple(sites), CouplingMatrix.from_pairs(n, overrides), axis)
    except SpinSystemError as exc:
        raise SpinSystemError(f"{source}: {exc}") from None


def load_system(path) -> SpinSystem:
    with open(path) as fh:
        return parse_system_text(fh.read(), str(path))
