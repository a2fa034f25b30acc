"""Bucket detection, coincidence post-selection and count sampling."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .state import FockState

ClickPattern = frozenset
OUTCOMES = ("pp", "pm", "mp", "mm")


@dataclass(frozen=True)
class DetectorModel:
    """Geiger-mode bucket detectors with a common quantum efficiency."""

    efficiency: float = 0.74
    number_resolving: bool = False

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency}")
        if self.number_resolving:
            raise ValueError("only bucket (non number-resolving) detectors are modelled")


@dataclass(frozen=True)
class CoincidenceRule:
    """Split of labels (detectors or rails) into Alice's and Bob's side.

    The first label on each side is the ``+`` outcome, the second ``-``.
    """

    alice: tuple[str, ...] = ("D1", "D2")
    bob: tuple[str, ...] = ("D3", "D4")

    def __post_init__(self):
        object.__setattr__(self, "alice", tuple(self.alice))
        object.__setattr__(self, "bob", tuple(self.bob))
        if set(self.alice) & set(self.bob):
            raise ValueError("a label cannot belong to both sides")

    def accepts(self, pattern) -> bool:
        return len(set(pattern) & set(self.alice)) == 1 and len(set(pattern) & set(self.bob)) == 1

    def outcome(self, pattern) -> str:
        """Map an accepted two-click pattern to 'pp', 'pm', 'mp' or 'mm'."""
        (a,) = set(pattern) & set(self.alice)
        (b,) = set(pattern) & set(self.bob)
        sign = lambda side, d: "p" if d == side[0] else "m"  # noqa: E731
        return sign(self.alice, a) + sign(self.bob, b)


PAPER_RULE = CoincidenceRule()


@dataclass(frozen=True)
class CountsTable:
    n_pp: int
    n_pm: int
    n_mp: int
    n_mm: int
    setting: object = None

    def __post_init__(self):
        if min(self.n_pp, self.n_pm, self.n_mp, self.n_mm) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.n_pp, self.n_pm, self.n_mp, self.n_mm)


class PostSelectionEmpty(ValueError):
    """No probability mass survives the coincidence rule."""


class DistinguishableSectors(ValueError):
    """The conditional state is mixed over temporal/path sectors."""


def outcome_distribution(
    state: FockState,
    detector_map: Mapping[str, str],
    model: DetectorModel = DetectorModel(1.0),
) -> dict[frozenset, float]:
    """Click-pattern probabilities for bucket detectors.

    Temporal components are summed incoherently (detectors do not resolve
    them). Each photon is detected independently with probability
    ``model.efficiency``; the empty pattern is included.
    """
    per_occupation: dict[tuple, float] = defaultdict(float)
    for key, amp in state.terms.items():
        counts: dict[str, int] = defaultdict(int)
        for m in key:
            if m.path not in detector_map:
                raise ValueError(f"populated path {m.path!r} has no detector")
            counts[detector_map[m.path]] += 1
        per_occupation[tuple(sorted(counts.items()))] += abs(amp) ** 2

    eta = model.efficiency
    dist: dict[frozenset, float] = defaultdict(float)
    for occ, p in per_occupation.items():
        # each detector independently fires with 1 - (1 - eta)**n
        options = []
        for det, n in occ:
            fire = 1.0 - (1.0 - eta) ** n
            options.append([(det, fire), (None, 1.0 - fire)])
        for choice in product(*options):
            q = p
            for _, w in choice:
                q *= w
            if q:
                dist[frozenset(d for d, _ in choice if d is not None)] += q
    return dict(dist)


def post_select(distribution: Mapping, rule: CoincidenceRule = PAPER_RULE) -> tuple[dict, float]:
    """Keep patterns with exactly one click per side and renormalize."""
    kept = {pat: p for pat, p in distribution.items() if rule.accepts(pat)}
    acceptance = math.fsum(kept.values())
    if acceptance <= 0.0:
        raise PostSelectionEmpty("no coincidence between Alice and Bob survives")
    return {pat: p / acceptance for pat, p in kept.items()}, acceptance


def coincidence_probabilities(distribution: Mapping, rule: CoincidenceRule = PAPER_RULE) -> dict[str, float]:
    """Collapse accepted patterns onto the 'pp', 'pm', 'mp', 'mm' channels."""
    out = dict.fromkeys(OUTCOMES, 0.0)
    for pat, p in distribution.items():
        if rule.accepts(pat):
            out[rule.outcome(pat)] += p
    return out


def _side_sectors(state: FockState, rule: CoincidenceRule) -> dict[tuple, np.ndarray]:
    index = {"H": 0, "V": 1}
    sectors: dict[tuple, np.ndarray] = {}
    for key, amp in state.terms.items():
        if len(key) != 2:
            raise ValueError("conditional polarization state needs a two-photon state")
        alice = [m for m in key if m.path in rule.alice]
        bob = [m for m in key if m.path in rule.bob]
        if len(alice) != 1 or len(bob) != 1:
            continue
        (a,), (b,) = alice, bob
        sector = (a.path, a.temporal, b.path, b.temporal)
        vec = sectors.setdefault(sector, np.zeros(4, dtype=complex))
        vec[2 * index[a.pol] + index[b.pol]] += amp
    return sectors


def conditional_polarization_ensemble(state: FockState, rule: CoincidenceRule) -> list[tuple[float, np.ndarray]]:
    """Cross-side polarization state as weighted pure states per sector.

    Basis order is HH, HV, VH, VV (Alice first). The spatial and temporal
    labels of the two photons are traced out, so each distinct sector
    contributes one normalized two-qubit vector; weights sum to 1.
    """
    sectors = _side_sectors(state, rule)
    total = math.fsum(float(np.vdot(v, v).real) for v in sectors.values())
    if total <= 0.0:
        raise PostSelectionEmpty("state has no amplitude with one photon per side")
    out = []
    for _, vec in sorted(sectors.items()):
        w = float(np.vdot(vec, vec).real)
        if w > 0.0:
            out.append((w / total, vec / math.sqrt(w)))
    return out


def conditional_polarization_state(state: FockState, rule: CoincidenceRule) -> np.ndarray:
    """Pure cross-side polarization state; requires a single sector."""
    ens = conditional_polarization_ensemble(state, rule)
    if len(ens) != 1:
        raise DistinguishableSectors(
            f"conditional state spans {len(ens)} distinguishable sectors; use the ensemble form"
        )
    return ens[0][1]


def ensemble_fidelity(ensemble: Sequence[tuple[float, np.ndarray]], target: np.ndarray) -> float:
    """<target| rho |target> for rho given as a weighted pure-state list."""
    return math.fsum(w * abs(np.vdot(target, v)) ** 2 for w, v in ensemble)


def seed_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for point ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def sample_counts(
    distribution,
    mean_total_pairs: float,
    seed: int | np.random.Generator,
    accidental_rate: float = 0.0,
    setting=None,
) -> CountsTable:
    """Independent Poisson counts for the four coincidence channels.

    ``distribution`` is either a mapping with keys 'pp', 'pm', 'mp', 'mm' or
    a 4-sequence in that order, summing to 1. ``accidental_rate`` adds a
    constant mean count per channel.
    """
    if isinstance(distribution, Mapping):
        probs = np.array([distribution.get(k, 0.0) for k in OUTCOMES], dtype=float)
    else:
        probs = np.asarray(distribution, dtype=float)
    if probs.shape != (4,) or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError(f"invalid coincidence distribution {probs}")
    if not mean_total_pairs > 0:
        raise ValueError("mean_total_pairs must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else seed_stream(seed)
    n = rng.poisson(probs * mean_total_pairs + accidental_rate)
    return CountsTable(*(int(x) for x in n), setting=setting)
