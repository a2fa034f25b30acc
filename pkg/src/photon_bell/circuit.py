"""Interferometers as ordered element lists.

Paths are rails that keep their names through the network: a two-port
element acts in place on its two rails. The paper-layout preset uses four
rails ``a1, b1, a2, b2``. Photon ``k`` starts on ``ak``; its beamsplitter
sends the transmitted part along ``ak`` and the reflected part along ``bk``.
The b rails meet on the Alice polarizing beamsplitter and the a rails on the
Bob one, so after recombination and analysis the detectors sit on

    D1 = b1 (Alice, +)   D2 = b2 (Alice, -)
    D3 = a1 (Bob, +)     D4 = a2 (Bob, -)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .state import (
    FockState,
    TemporalWavepacket,
    apply_beamsplitter,
    apply_hwp,
    apply_pbs,
    apply_phase,
    apply_polarizer,
    hwp_matrix,
    set_delay,
    temporal_overlap,
)

NORM_TOLERANCE = 1e-10


class NumericalContractError(RuntimeError):
    """A lossless evolution drifted in norm beyond tolerance."""


@dataclass(frozen=True)
class BeamSplitter:
    path_a: str
    path_b: str
    reflectivity: float = 0.5

    @property
    def paths(self):
        return (self.path_a, self.path_b)


@dataclass(frozen=True)
class PolarizingBS:
    path_a: str
    path_b: str

    @property
    def paths(self):
        return (self.path_a, self.path_b)


@dataclass(frozen=True)
class HalfWavePlate:
    path: str
    angle_deg: float

    @property
    def paths(self):
        return (self.path,)


@dataclass(frozen=True)
class PhaseShift:
    path: str
    phi_rad: float

    @property
    def paths(self):
        return (self.path,)


@dataclass(frozen=True)
class Polarizer:
    path: str
    pass_axis: str

    @property
    def paths(self):
        return (self.path,)


@dataclass(frozen=True)
class Delay:
    """Path delay; ``mode_overlap`` folds in spatial mode mismatch."""

    path: str
    delay_fs: float
    mode_overlap: float = 1.0

    @property
    def paths(self):
        return (self.path,)


Element = Union[BeamSplitter, PolarizingBS, HalfWavePlate, PhaseShift, Polarizer, Delay]


@dataclass(frozen=True)
class Circuit:
    paths: tuple[str, ...]
    elements: tuple[Element, ...] = ()
    wavepacket_reference: TemporalWavepacket = field(default_factory=TemporalWavepacket)

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        object.__setattr__(self, "elements", tuple(self.elements))
        if len(set(self.paths)) != len(self.paths):
            raise ValueError(f"duplicate paths in {self.paths}")
        for el in self.elements:
            for p in el.paths:
                if p not in self.paths:
                    raise ValueError(f"{el} references undeclared path {p!r}")
            if len(set(el.paths)) != len(el.paths):
                raise ValueError(f"{el} acts twice on the same path")

    def __add__(self, other: "Circuit") -> "Circuit":
        paths = self.paths + tuple(p for p in other.paths if p not in self.paths)
        return Circuit(paths, self.elements + other.elements, self.wavepacket_reference)

    def truncated(self, n_elements: int) -> "Circuit":
        return Circuit(self.paths, self.elements[:n_elements], self.wavepacket_reference)

    @property
    def is_lossless(self) -> bool:
        return not any(isinstance(el, Polarizer) for el in self.elements)


def apply_element(el: Element, state: FockState, reference: TemporalWavepacket) -> tuple[FockState, float]:
    if isinstance(el, BeamSplitter):
        return apply_beamsplitter(state, el.path_a, el.path_b, el.reflectivity), 1.0
    if isinstance(el, PolarizingBS):
        return apply_pbs(state, el.path_a, el.path_b), 1.0
    if isinstance(el, HalfWavePlate):
        return apply_hwp(state, el.path, el.angle_deg), 1.0
    if isinstance(el, PhaseShift):
        return apply_phase(state, el.path, el.phi_rad), 1.0
    if isinstance(el, Polarizer):
        return apply_polarizer(state, el.path, el.pass_axis)
    if isinstance(el, Delay):
        return set_delay(state, el.path, reference, el.delay_fs, el.mode_overlap), 1.0
    raise TypeError(f"unknown element {el!r}")


def evolve(circuit: Circuit, state: FockState) -> tuple[FockState, float]:
    """Apply the circuit's elements in order.

    Returns the output state and the product of polarizer success
    probabilities. Lossless steps are checked for norm drift.
    """
    extra = set(state.paths) - set(circuit.paths)
    if extra:
        raise ValueError(f"state uses paths {sorted(extra)} not declared by the circuit")
    state = state.with_paths(circuit.paths)
    survival = 1.0
    for el in circuit.elements:
        before = state.norm()
        state, p = apply_element(el, state, circuit.wavepacket_reference)
        survival *= p
        if not isinstance(el, Polarizer) and abs(state.norm() - before) > NORM_TOLERANCE:
            raise NumericalContractError(f"norm drift {state.norm() - before:.3e} after {el}")
    return state, survival


# --- single-photon mode matrices -------------------------------------------

def mode_index(paths: Sequence[str]) -> dict[tuple[str, str], int]:
    """Basis order of the transfer matrix: (path, H), (path, V) per path."""
    return {(p, pol): 2 * i + j for i, p in enumerate(paths) for j, pol in enumerate("HV")}


def element_matrix(el: Element, paths: Sequence[str], reference: TemporalWavepacket | None = None) -> np.ndarray:
    """Matrix U with a_in^dag -> sum_out U[out, in] a_out^dag."""
    idx = mode_index(paths)
    u = np.eye(2 * len(paths), dtype=complex)
    if isinstance(el, BeamSplitter):
        t = math.sqrt(1.0 - el.reflectivity)
        r = 1j * math.sqrt(el.reflectivity)
        for pol in "HV":
            a, b = idx[el.path_a, pol], idx[el.path_b, pol]
            u[a, a] = u[b, b] = t
            u[a, b] = u[b, a] = r
    elif isinstance(el, PolarizingBS):
        a, b = idx[el.path_a, "V"], idx[el.path_b, "V"]
        u[a, a] = u[b, b] = 0
        u[a, b] = u[b, a] = 1j
    elif isinstance(el, HalfWavePlate):
        c, s = hwp_matrix(el.angle_deg)
        h, v = idx[el.path, "H"], idx[el.path, "V"]
        u[h, h], u[h, v], u[v, h], u[v, v] = c, s, s, -c
    elif isinstance(el, PhaseShift):
        ph = np.exp(1j * el.phi_rad)
        for pol in "HV":
            u[idx[el.path, pol], idx[el.path, pol]] = ph
    elif isinstance(el, Delay):
        ref = reference or TemporalWavepacket()
        gamma = el.mode_overlap * temporal_overlap(ref, ref.shifted(el.delay_fs))
        if gamma != 1.0:
            raise ValueError(f"{el} changes the temporal mode and has no transfer-matrix form")
    elif isinstance(el, Polarizer):
        raise ValueError("polarizers are not unitary; no transfer matrix")
    else:
        raise TypeError(f"unknown element {el!r}")
    return u


def transfer_matrix(circuit: Circuit) -> np.ndarray:
    """Product of per-element single-photon mode matrices (unitary)."""
    u = np.eye(2 * len(circuit.paths), dtype=complex)
    for el in circuit.elements:
        u = element_matrix(el, circuit.paths, circuit.wavepacket_reference) @ u
    if not np.allclose(u.conj().T @ u, np.eye(len(u)), atol=NORM_TOLERANCE, rtol=0):
        raise NumericalContractError("compiled transfer matrix is not unitary")
    return u


# --- presets ---------------------------------------------------------------

PAPER_PATHS = ("a1", "b1", "a2", "b2")
PAPER_DETECTORS = {"b1": "D1", "b2": "D2", "a1": "D3", "a2": "D4"}
ALICE_RAILS = ("b1", "b2")
BOB_RAILS = ("a1", "a2")


def paper_interferometer(
    phi_rad: float = 0.0,
    delay1_fs: float = 0.0,
    delay2_fs: float = 0.0,
    delay3_fs: float = 0.0,
    analyzer_alice_deg: float | None = None,
    analyzer_bob_deg: float | None = None,
    mode_overlap: float = 1.0,
    width_fs: float = 100.0,
) -> Circuit:
    """Two-beamsplitter, two-PBS interferometer with optional analyzers.

    Feed it ``make_source_state("VVInput", ("a1", "a2"))``. Analyzer angles
    are polarization analysis angles; the wave plate sits at half the angle.
    With both analyzers None the circuit stops after recombination, leaving
    Alice's photon on b1 and Bob's on a1 with their polarization intact.

    Prism 1 delays the b1 arm (and carries ``mode_overlap``), prism 2 delays
    photon 2 before its beamsplitter, prism 3 delays the b2 arm.
    """
    els: list[Element] = [
        HalfWavePlate("a1", 45.0),  # source emits V; photon 1 runs as H
        Delay("a2", delay2_fs),
        BeamSplitter("a1", "b1", 0.5),
        BeamSplitter("a2", "b2", 0.5),
        PhaseShift("b2", phi_rad),
        Delay("b1", delay1_fs, mode_overlap),
        Delay("b2", delay3_fs),
        PolarizingBS("b1", "b2"),
        PolarizingBS("a1", "a2"),
    ]
    # the free output port of each recombining PBS doubles as the second
    # analyzer rail; it is empty whenever the arms carry pure H / pure V
    if analyzer_alice_deg is not None:
        els += [HalfWavePlate("b1", analyzer_alice_deg / 2.0), PolarizingBS("b1", "b2")]
    if analyzer_bob_deg is not None:
        els += [HalfWavePlate("a1", analyzer_bob_deg / 2.0), PolarizingBS("a1", "a2")]
    return Circuit(PAPER_PATHS, tuple(els), TemporalWavepacket(0.0, width_fs))


HOM_PATHS = ("x", "y")
HOM_DETECTORS = {"x": "P1", "y": "P2"}


def hom_test_circuit(delay_fs: float, mode_overlap: float = 1.0, width_fs: float = 100.0) -> Circuit:
    """Path-length check at a recombining PBS.

    Two V photons enter on ``x`` and ``y``; the one on ``x`` is turned to H so
    that both leave the PBS on rail ``x`` in orthogonal polarizations. A
    wave plate at 22.5 degrees then maps them to +/-45 degrees and a second
    PBS splits rail ``x`` onto ``x`` and ``y``. The two-photon amplitude
    a_D^dag a_A^dag bunches, so cross-port coincidences vanish for
    indistinguishable photons and reach 1/2 for distinguishable ones.
    """
    els = (
        HalfWavePlate("x", 45.0),
        Delay("y", delay_fs, mode_overlap),
        PolarizingBS("x", "y"),
        HalfWavePlate("x", 22.5),
        PolarizingBS("x", "y"),
    )
    return Circuit(HOM_PATHS, els, TemporalWavepacket(0.0, width_fs))
