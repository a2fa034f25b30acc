"""Correlations, the CHSH combination and visibility fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .detection import CountsTable

TSIRELSON = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class MeasurementSetting:
    """Polarization analysis angles in degrees, folded into [0, 180)."""

    alice_deg: float
    bob_deg: float

    def __post_init__(self):
        object.__setattr__(self, "alice_deg", float(self.alice_deg) % 180.0)
        object.__setattr__(self, "bob_deg", float(self.bob_deg) % 180.0)


# Alice (22.5, 67.5), Bob (45, 0), in the row order of the published table
PAPER_SETTINGS = (
    MeasurementSetting(22.5, 45.0),
    MeasurementSetting(22.5, 0.0),
    MeasurementSetting(67.5, 45.0),
    MeasurementSetting(67.5, 0.0),
)


@dataclass(frozen=True)
class CorrelationEstimate:
    e_value: float
    sigma: float
    counts: CountsTable | None = None

    def __post_init__(self):
        if abs(self.e_value) > 1.0 + 1e-12:
            raise ValueError(f"correlation {self.e_value} outside [-1, 1]")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True)
class ChshResult:
    estimates: tuple[CorrelationEstimate, ...]
    sign_vector: tuple[int, ...]
    s_value: float
    sigma_s: float

    @property
    def n_sigma_violation(self) -> float:
        if self.sigma_s == 0:
            return math.inf if abs(self.s_value) > 2 else 0.0
        return (abs(self.s_value) - 2.0) / self.sigma_s


def correlation_from_counts(counts: CountsTable) -> CorrelationEstimate:
    """E = (N++ + N-- - N+- - N-+) / N with independent-Poisson sigma."""
    n = counts.total
    if n <= 0:
        raise ValueError("cannot estimate a correlation from zero counts")
    signs = (1, -1, -1, 1)
    nums = counts.as_tuple()
    e = (nums[0] + nums[3] - nums[1] - nums[2]) / n
    var = math.fsum((s - e) ** 2 * k for s, k in zip(signs, nums)) / n**2
    return CorrelationEstimate(e, math.sqrt(var), counts)


def _observable(angle_deg: float) -> np.ndarray:
    """+1/-1 projector difference for linear polarization at ``angle_deg``."""
    a = math.radians(angle_deg)
    plus = np.array([math.cos(a), math.sin(a)])
    minus = np.array([-math.sin(a), math.cos(a)])
    return np.outer(plus, plus) - np.outer(minus, minus)


def density_matrix(state_or_ensemble) -> np.ndarray:
    """4x4 density matrix from a pure vector or a [(weight, vector), ...] list."""
    if isinstance(state_or_ensemble, np.ndarray) and state_or_ensemble.ndim == 2:
        return state_or_ensemble
    if isinstance(state_or_ensemble, np.ndarray):
        v = state_or_ensemble
        return np.outer(v, v.conj())
    return sum(w * np.outer(v, np.conj(v)) for w, v in state_or_ensemble)


def analytic_correlation(state_or_ensemble, setting: MeasurementSetting) -> float:
    """<A(alice) (x) B(bob)> over the HH, HV, VH, VV polarization basis."""
    rho = density_matrix(state_or_ensemble)
    op = np.kron(_observable(setting.alice_deg), _observable(setting.bob_deg))
    return float(np.real(np.trace(rho @ op)))


def psi_state(phi_rad: float) -> np.ndarray:
    """(|HV> + e^{i phi}|VH>)/sqrt(2)."""
    v = np.zeros(4, dtype=complex)
    v[1] = 1.0
    v[2] = np.exp(1j * phi_rad)
    return v / math.sqrt(2.0)


def dephased_ensemble(visibility: float, phi_rad: float = 0.0) -> list[tuple[float, np.ndarray]]:
    """V * psi(phi) + (1 - V) * equal mixture of |HV> and |VH>."""
    hv = np.array([0, 1, 0, 0], dtype=complex)
    vh = np.array([0, 0, 1, 0], dtype=complex)
    return [(visibility, psi_state(phi_rad)), ((1 - visibility) / 2, hv), ((1 - visibility) / 2, vh)]


def _check_signs(sign_vector: Sequence[int]) -> tuple[int, ...]:
    signs = tuple(int(s) for s in sign_vector)
    if len(signs) != 4 or any(s not in (1, -1) for s in signs) or signs.count(-1) != 1:
        raise ValueError(f"sign vector must hold four +/-1 entries with exactly one -1, got {sign_vector}")
    return signs


def default_sign_vector(settings: Sequence[MeasurementSetting]) -> tuple[int, ...]:
    """Minus on the (first Alice angle, second Bob angle) pair.

    Angles are ranked by first appearance, which reproduces the published
    combination when ``settings`` follow the table's row order.
    """
    alice = list(dict.fromkeys(s.alice_deg for s in settings))
    bob = list(dict.fromkeys(s.bob_deg for s in settings))
    if len(alice) != 2 or len(bob) != 2:
        raise ValueError("CHSH needs two Alice and two Bob angles")
    return tuple(-1 if (s.alice_deg, s.bob_deg) == (alice[0], bob[1]) else 1 for s in settings)


def chsh(estimates: Sequence[CorrelationEstimate], sign_vector: Sequence[int]) -> ChshResult:
    if len(estimates) != 4:
        raise ValueError("CHSH needs exactly four correlation estimates")
    signs = _check_signs(sign_vector)
    s = math.fsum(k * est.e_value for k, est in zip(signs, estimates))
    sigma = math.sqrt(math.fsum(est.sigma**2 for est in estimates))
    return ChshResult(tuple(estimates), signs, s, sigma)


def lhv_max(settings: Sequence[MeasurementSetting], sign_vector: Sequence[int]) -> float:
    """Largest signed CHSH sum over all deterministic local strategies.

    Each party's outcome is a function of its own angle only; with two
    angles per side that is 4 x 4 = 16 joint strategies.
    """
    alice = sorted({s.alice_deg for s in settings})
    bob = sorted({s.bob_deg for s in settings})
    best = -math.inf
    for a_out in product((1, -1), repeat=len(alice)):
        amap = dict(zip(alice, a_out))
        for b_out in product((1, -1), repeat=len(bob)):
            bmap = dict(zip(bob, b_out))
            val = sum(k * amap[s.alice_deg] * bmap[s.bob_deg] for k, s in zip(sign_vector, settings))
            best = max(best, val)
    return float(best)


@dataclass(frozen=True)
class VisibilityFit:
    offset: float
    amplitude: float
    phase0: float
    residual_rms: float

    @property
    def visibility(self) -> float:
        return self.amplitude / self.offset


def fit_fringe(points: Sequence[tuple[float, float]]) -> VisibilityFit:
    """Least-squares ``offset + amplitude * cos(x + phase0)`` on a 2pi-periodic axis.

    Linear in the regressors (1, cos x, sin x); ``amplitude`` is returned
    non-negative.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 5:
        raise ValueError("fringe fit needs at least 5 points")
    x, y = pts[:, 0], pts[:, 1]
    if x.max() - x.min() < 2 * math.pi * (1 - 1e-9):
        raise ValueError("fringe scan must span at least one full period")
    design = np.column_stack([np.ones_like(x), np.cos(x), np.sin(x)])
    (c0, c1, c2), *_ = np.linalg.lstsq(design, y, rcond=None)
    if c0 <= 0:
        raise ValueError(f"non-positive fitted offset {c0}")
    amplitude = math.hypot(c1, c2)
    phase0 = math.atan2(-c2, c1) if amplitude > 0 else 0.0
    resid = y - design @ np.array([c0, c1, c2])
    return VisibilityFit(float(c0), amplitude, phase0, float(np.sqrt(np.mean(resid**2))))


def dip_visibility(scan: Sequence[tuple[float, float]], baseline: float) -> float:
    """1 - min(coincidence) / baseline."""
    if not scan:
        raise ValueError("empty dip scan")
    if not baseline > 0:
        raise ValueError("baseline must be positive")
    return 1.0 - min(p for _, p in scan) / baseline
