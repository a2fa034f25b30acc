"""Sparse few-photon Fock states over (path, polarization, temporal) modes.

A state is stored as a map from a sorted tuple of occupied modes (one entry
per photon, repeated for multiple occupation) to the amplitude of the
corresponding normalized Fock basis vector. Linear optical elements act by
substituting creation operators, which is cheap for the two-photon states
used here.
"""

from __future__ import annotations

import cmath
import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

PRUNE_THRESHOLD = 1e-12

POLARIZATIONS = ("H", "V")


class PostSelectionError(ValueError):
    """Raised when a projection leaves no surviving amplitude."""


class ModeLabel(NamedTuple):
    path: str
    pol: str
    temporal: int = 0


Key = tuple  # sorted tuple of ModeLabel, one entry per photon


@dataclass(frozen=True)
class TemporalWavepacket:
    """Gaussian temporal wavepacket ``exp(-(t - center)**2 / (2 * width**2))``.

    Both ``center`` and ``width`` are in femtoseconds.
    """

    center: float = 0.0
    width: float = 100.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"wavepacket width must be positive, got {self.width}")

    def shifted(self, delay_fs: float) -> "TemporalWavepacket":
        return TemporalWavepacket(self.center + delay_fs, self.width)


def temporal_overlap(w1: TemporalWavepacket, w2: TemporalWavepacket) -> float:
    """Amplitude overlap of two normalized Gaussian wavepackets, in [0, 1]."""
    s1, s2 = w1.width, w2.width
    s = s1 * s1 + s2 * s2
    tau = w1.center - w2.center
    return math.sqrt(2.0 * s1 * s2 / s) * math.exp(-tau * tau / (2.0 * s))


def _occupations(key: Key) -> dict[ModeLabel, int]:
    occ: dict[ModeLabel, int] = defaultdict(int)
    for mode in key:
        occ[mode] += 1
    return occ


def _bosonic_factor(key: Key) -> float:
    """sqrt(prod n_m!) for the occupation vector encoded by ``key``."""
    f = 1
    for n in _occupations(key).values():
        f *= math.factorial(n)
    return math.sqrt(f)


@dataclass(frozen=True)
class FockState:
    """Immutable sparse superposition of multimode Fock basis states.

    ``paths`` is the declared set of spatial paths (the mode register),
    ``deficit`` the probability already removed by lossy projections.
    """

    paths: tuple[str, ...]
    terms: Mapping[Key, complex] = field(default_factory=dict)
    deficit: float = 0.0

    def __post_init__(self):
        paths = tuple(self.paths)
        if len(set(paths)) != len(paths):
            raise ValueError(f"duplicate path labels in {paths}")
        clean = {}
        for key, amp in self.terms.items():
            key = tuple(sorted(ModeLabel(*m) for m in key))
            for m in key:
                if m.path not in paths:
                    raise ValueError(f"mode {m} references undeclared path {m.path!r}")
                if m.pol not in POLARIZATIONS:
                    raise ValueError(f"unknown polarization {m.pol!r}")
                if m.temporal < 0:
                    raise ValueError("temporal index must be non-negative")
            if abs(amp) >= PRUNE_THRESHOLD:
                clean[key] = clean.get(key, 0j) + complex(amp)
        object.__setattr__(self, "paths", paths)
        object.__setattr__(self, "terms", MappingProxyType(clean))

    @classmethod
    def vacuum(cls, paths: Sequence[str]) -> "FockState":
        return cls(tuple(paths), {(): 1.0 + 0j})

    @classmethod
    def single_photon(cls, paths: Sequence[str], path: str, pol: str, temporal: int = 0):
        return cls(tuple(paths), {(ModeLabel(path, pol, temporal),): 1.0 + 0j})

    def norm(self) -> float:
        """Sum of squared amplitude magnitudes."""
        return math.fsum(abs(a) ** 2 for a in self.terms.values())

    def photon_numbers(self) -> set[int]:
        return {len(k) for k in self.terms}

    def amplitude(self, modes: Iterable) -> complex:
        key = tuple(sorted(ModeLabel(*m) for m in modes))
        return self.terms.get(key, 0j)

    def max_temporal(self) -> int:
        return max((m.temporal for k in self.terms for m in k), default=0)

    def with_paths(self, paths: Sequence[str]) -> "FockState":
        """Same state embedded in a larger path register."""
        missing = set(self.paths) - set(paths)
        if missing:
            raise ValueError(f"paths {sorted(missing)} not in new register")
        return FockState(tuple(paths), self.terms, self.deficit)

    def require_path(self, path: str) -> None:
        if path not in self.paths:
            raise ValueError(f"path {path!r} not in register {self.paths}")

    def __iter__(self):
        return iter(self.terms.items())

    def __len__(self):
        return len(self.terms)


ModeRule = Callable[[ModeLabel], "list[tuple[ModeLabel, complex]] | None"]


def transform(state: FockState, rule: ModeRule) -> FockState:
    """Substitute every creation operator ``a_m^dag -> sum_k c_k a_k^dag``.

    ``rule`` returns the image of a mode as ``[(mode, coefficient), ...]`` or
    None to leave the mode untouched.
    """
    images: dict[ModeLabel, list] = {}
    out: dict[Key, complex] = defaultdict(complex)
    for key, amp in state.terms.items():
        poly = amp / _bosonic_factor(key)
        factors = []
        for mode in key:
            if mode not in images:
                img = rule(mode)
                images[mode] = [(mode, 1.0)] if img is None else img
            factors.append(images[mode])
        for choice in product(*factors):
            coeff = poly
            for _, c in choice:
                coeff *= c
            new_key = tuple(sorted(m for m, _ in choice))
            out[new_key] += coeff
    terms = {k: a * _bosonic_factor(k) for k, a in out.items()}
    return FockState(state.paths, terms, state.deficit)


def make_source_state(preset: str, paths: Sequence[str], register: Sequence[str] | None = None) -> FockState:
    """Two-photon source state on ``paths = (p1, p2)``.

    ``"PhiPlusSign"`` gives (|H>|H> + |V>|V>)/sqrt(2) and ``"VVInput"`` gives
    |V>|V>, both in temporal component 0.
    """
    p1, p2 = paths
    if p1 == p2:
        raise ValueError("source paths must be distinct")
    register = tuple(register) if register is not None else (p1, p2)
    if preset == "PhiPlusSign":
        a = 1 / math.sqrt(2)
        terms = {
            (ModeLabel(p1, "H"), ModeLabel(p2, "H")): a,
            (ModeLabel(p1, "V"), ModeLabel(p2, "V")): a,
        }
    elif preset == "VVInput":
        terms = {(ModeLabel(p1, "V"), ModeLabel(p2, "V")): 1.0}
    else:
        raise ValueError(f"unknown source preset {preset!r}")
    return FockState(register, terms)


def apply_beamsplitter(state: FockState, path_a: str, path_b: str, reflectivity: float) -> FockState:
    """Polarization-preserving beamsplitter with i on reflection."""
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError(f"reflectivity must lie in [0, 1], got {reflectivity}")
    state.require_path(path_a)
    state.require_path(path_b)
    t = math.sqrt(1.0 - reflectivity)
    r = 1j * math.sqrt(reflectivity)
    other = {path_a: path_b, path_b: path_a}

    def rule(m):
        if m.path not in other:
            return None
        return [(m, t), (m._replace(path=other[m.path]), r)]

    return transform(state, rule)


def apply_pbs(state: FockState, path_a: str, path_b: str) -> FockState:
    """Polarizing beamsplitter: H transmits, V reflects with a factor i."""
    state.require_path(path_a)
    state.require_path(path_b)
    other = {path_a: path_b, path_b: path_a}

    def rule(m):
        if m.path not in other or m.pol == "H":
            return None
        return [(m._replace(path=other[m.path]), 1j)]

    return transform(state, rule)


def hwp_matrix(angle_deg: float) -> tuple[float, float]:
    """(cos 2θ, sin 2θ) for a half-wave plate with fast axis at θ."""
    two_theta = math.radians(2.0 * angle_deg)
    return math.cos(two_theta), math.sin(two_theta)


def apply_hwp(state: FockState, path: str, angle_deg: float) -> FockState:
    state.require_path(path)
    c, s = hwp_matrix(angle_deg)

    def rule(m):
        if m.path != path:
            return None
        h, v = m._replace(pol="H"), m._replace(pol="V")
        if m.pol == "H":
            return [(h, c), (v, s)]
        return [(h, s), (v, -c)]

    return transform(state, rule)


def apply_phase(state: FockState, path: str, phi_rad: float) -> FockState:
    state.require_path(path)
    ph = cmath.exp(1j * phi_rad)
    return transform(state, lambda m: [(m, ph)] if m.path == path else None)


def apply_polarizer(state: FockState, path: str, pass_axis: str) -> tuple[FockState, float]:
    """Project out photons of the blocked polarization on ``path``.

    Returns the renormalized state and the probability that the projection
    succeeded. Raises PostSelectionError if nothing survives.
    """
    state.require_path(path)
    if pass_axis not in POLARIZATIONS:
        raise ValueError(f"pass axis must be H or V, got {pass_axis!r}")
    before = state.norm()
    kept = {
        k: a for k, a in state.terms.items()
        if not any(m.path == path and m.pol != pass_axis for m in k)
    }
    after = math.fsum(abs(a) ** 2 for a in kept.values())
    if after <= PRUNE_THRESHOLD ** 2 or before == 0.0:
        raise PostSelectionError(f"{pass_axis}-pass polarizer on {path!r} blocks the whole state")
    p = after / before
    scale = 1.0 / math.sqrt(after)
    deficit = 1.0 - (1.0 - state.deficit) * p
    return FockState(state.paths, {k: a * scale for k, a in kept.items()}, deficit), p


def set_delay(
    state: FockState,
    path: str,
    wavepacket_reference: TemporalWavepacket,
    delay_fs: float,
    mode_overlap: float = 1.0,
) -> FockState:
    """Delay every photon on ``path`` relative to the reference wavepacket.

    A photon in the reference component 0 becomes ``g * (component 0) +
    sqrt(1 - g**2) * (fresh component)`` where ``g`` is the temporal overlap
    times ``mode_overlap``. Photons already in a non-reference component are
    left where they are, since the register holds only the reference and
    its orthogonal remainders.
    """
    state.require_path(path)
    if not 0.0 <= mode_overlap <= 1.0:
        raise ValueError(f"mode_overlap must lie in [0, 1], got {mode_overlap}")
    gamma = mode_overlap * temporal_overlap(wavepacket_reference, wavepacket_reference.shifted(delay_fs))
    if gamma == 1.0:
        return state
    fresh = state.max_temporal() + 1
    rest = math.sqrt(max(0.0, 1.0 - gamma * gamma))

    def rule(m):
        if m.path != path or m.temporal != 0:
            return None
        return [(m, gamma), (m._replace(temporal=fresh), rest)]

    return transform(state, rule)


def inner_product(bra: FockState, ket: FockState) -> complex:
    """<bra|ket> over the common sparse support."""
    if set(bra.paths) != set(ket.paths):
        raise ValueError(f"mismatched mode registers {bra.paths} vs {ket.paths}")
    small, large = (bra, ket) if len(bra) <= len(ket) else (ket, bra)
    total = 0j
    for k, a in small.terms.items():
        b = large.terms.get(k)
        if b is not None:
            total += (a.conjugate() * b) if small is bra else (b.conjugate() * a)
    return total


def fidelity(state: FockState, reference: FockState) -> float:
    """|<reference|state>|**2."""
    return abs(inner_product(reference, state)) ** 2
