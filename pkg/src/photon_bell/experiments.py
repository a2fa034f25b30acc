"""Scenario runners behind the command line.

Every runner takes a :class:`ScenarioConfig`, returns plain data, and leaves
file output to :func:`write_csv` so that results can be checked in memory.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .bell import (
    ChshResult,
    CorrelationEstimate,
    MeasurementSetting,
    analytic_correlation,
    chsh,
    correlation_from_counts,
    default_sign_vector,
    dip_visibility,
    fit_fringe,
    psi_state,
)
from .circuit import (
    ALICE_RAILS,
    BOB_RAILS,
    HOM_DETECTORS,
    NumericalContractError,
    PAPER_DETECTORS,
    hom_test_circuit,
    evolve,
    paper_interferometer,
)
from .detection import (
    OUTCOMES,
    CoincidenceRule,
    CountsTable,
    DetectorModel,
    coincidence_probabilities,
    conditional_polarization_ensemble,
    ensemble_fidelity,
    outcome_distribution,
    post_select,
    sample_counts,
    seed_stream,
)
from .state import FockState, ModeLabel, make_source_state

SCENARIOS = ("hom_scan", "phase_scan", "chsh_run", "analyze", "state_check")
SIDES = CoincidenceRule(ALICE_RAILS, BOB_RAILS)
CHANNELS = ("d1d3", "d1d4", "d2d3", "d2d4")  # same order as 'pp', 'pm', 'mp', 'mm'
PROB_TOLERANCE = 1e-10


class ConfigError(ValueError):
    """Invalid scenario configuration or input file."""


@dataclass
class ScenarioConfig:
    scenario: str = "chsh_run"
    # interferometer
    phi_deg: float | None = None  # None: use the calibrated fringe maximum
    delay1_fs: float = 0.0
    delay2_fs: float = 0.0
    delay3_fs: float = 0.0
    mode_overlap: float = 1.0
    mode_overlap_bob: float | None = None  # hom_scan only; defaults to mode_overlap
    width_fs: float = 100.0
    efficiency: float = 1.0
    # phase scan
    analyzer_alice_deg: float = 45.0
    analyzer_bob_deg: float = 45.0
    phi_start_deg: float = 0.0
    phi_stop_deg: float = 360.0
    phi_step_deg: float = 11.25
    # hom scan
    delay_start_fs: float = -500.0
    delay_stop_fs: float = 500.0
    delay_step_fs: float = 10.0
    # chsh
    alice_deg: list[float] = field(default_factory=lambda: [22.5, 67.5])
    bob_deg: list[float] = field(default_factory=lambda: [45.0, 0.0])
    sign_vector: list[int] | None = None
    # sampling; scans sample only when mean_total_pairs is set
    mean_total_pairs: float | None = None
    accidental_rate: float = 0.0
    seed: int = 0
    # state check
    phi_target_deg: float | None = None  # None: same as the resolved phi
    fidelity_threshold: float = 0.99
    # analyze
    input: str | None = None
    # io
    out: str = "."
    svg: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if not 0.0 < self.efficiency <= 1.0:
            raise ConfigError("efficiency must lie in (0, 1]")
        if not 0.0 <= self.mode_overlap <= 1.0:
            raise ConfigError("mode_overlap must lie in [0, 1]")
        if self.mode_overlap_bob is not None and not 0.0 <= self.mode_overlap_bob <= 1.0:
            raise ConfigError("mode_overlap_bob must lie in [0, 1]")
        if not self.width_fs > 0:
            raise ConfigError("width_fs must be positive")
        if self.mean_total_pairs is not None and not self.mean_total_pairs > 0:
            raise ConfigError("mean_total_pairs must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if len(self.alice_deg) != 2 or len(self.bob_deg) != 2:
            raise ConfigError("alice_deg and bob_deg need exactly two angles each")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def settings(self) -> tuple[MeasurementSetting, ...]:
        (a, a2), (b, b2) = self.alice_deg, self.bob_deg
        return (
            MeasurementSetting(a, b),
            MeasurementSetting(a, b2),
            MeasurementSetting(a2, b),
            MeasurementSetting(a2, b2),
        )


@dataclass
class ScanResult:
    control_name: str
    control: list[float]
    columns: dict[str, list[float]]
    sampled: dict[str, list[int]] | None = None
    summary: dict[str, Any] = field(default_factory=dict)

    def header(self) -> list[str]:
        names = [self.control_name, *self.columns]
        if self.sampled:
            names += list(self.sampled)
        return names

    def rows(self) -> list[list]:
        out = []
        for i, x in enumerate(self.control):
            row = [x] + [col[i] for col in self.columns.values()]
            if self.sampled:
                row += [col[i] for col in self.sampled.values()]
            out.append(row)
        return out


def _grid(start: float, stop: float, step: float) -> list[float]:
    if step <= 0 or stop <= start:
        raise ConfigError(f"empty scan range [{start}, {stop}] with step {step}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(n)]


def _map_points(fn: Callable[[int, float], Any], controls: Sequence[float], jobs: int) -> list:
    if jobs == 1:
        return [fn(i, x) for i, x in enumerate(controls)]
    with ThreadPoolExecutor(jobs) as pool:
        return list(pool.map(fn, range(len(controls)), controls))


def _check_total(dist: dict, where: str) -> None:
    total = math.fsum(dist.values())
    if abs(total - 1.0) > PROB_TOLERANCE:
        raise NumericalContractError(f"{where}: outcome probabilities sum to {total!r}")


def paper_source() -> FockState:
    return make_source_state("VVInput", ("a1", "a2"))


def paper_distribution(cfg: ScenarioConfig, phi_rad: float, alice_deg: float, bob_deg: float) -> dict:
    """Full click-pattern distribution of the analyzed interferometer."""
    circ = paper_interferometer(
        phi_rad, cfg.delay1_fs, cfg.delay2_fs, cfg.delay3_fs,
        alice_deg, bob_deg, cfg.mode_overlap, cfg.width_fs,
    )
    out, _ = evolve(circ, paper_source())
    dist = outcome_distribution(out, PAPER_DETECTORS, DetectorModel(cfg.efficiency))
    _check_total(dist, "paper interferometer")
    return dist


def coincidence_channels(cfg: ScenarioConfig, phi_rad: float, alice_deg: float, bob_deg: float) -> dict[str, float]:
    """Unnormalized probabilities of the four cross-side channels."""
    return coincidence_probabilities(paper_distribution(cfg, phi_rad, alice_deg, bob_deg))


def calibrate_phase_offset(cfg: ScenarioConfig, n_points: int = 16) -> float:
    """Convention offset phi0 (rad) from the 45/45 D1-D3 fringe maximum.

    The D1-D3 fringe peaks at phi = -phi0; the result lies in (-pi, pi].
    """
    xs = [2 * math.pi * k / n_points for k in range(n_points + 1)]
    pts = [(x, coincidence_channels(cfg, x, 45.0, 45.0)["pp"]) for x in xs]
    phi0 = fit_fringe(pts).phase0
    return 0.0 if abs(phi0) < 1e-12 else phi0


def resolved_phi(cfg: ScenarioConfig) -> float:
    if cfg.phi_deg is not None:
        return math.radians(cfg.phi_deg)
    return 0.0 - calibrate_phase_offset(cfg)


# --- hom scan --------------------------------------------------------------

def hom_coincidence(delay_fs: float, mode_overlap: float, width_fs: float, efficiency: float = 1.0) -> float:
    """Probability that both detectors of the dip circuit click."""
    src = FockState(("x", "y"), {(ModeLabel("x", "V"), ModeLabel("y", "V")): 1.0})
    out, _ = evolve(hom_test_circuit(delay_fs, mode_overlap, width_fs), src)
    dist = outcome_distribution(out, HOM_DETECTORS, DetectorModel(efficiency))
    _check_total(dist, "hom circuit")
    return dist.get(frozenset(HOM_DETECTORS.values()), 0.0)


def run_hom_scan(cfg: ScenarioConfig) -> ScanResult:
    """Coincidence probability vs delay for the Alice and Bob dip circuits."""
    delays = _grid(cfg.delay_start_fs, cfg.delay_stop_fs, cfg.delay_step_fs)
    overlaps = {"alice": cfg.mode_overlap,
                "bob": cfg.mode_overlap if cfg.mode_overlap_bob is None else cfg.mode_overlap_bob}

    def point(i, d):
        return {side: hom_coincidence(d, m, cfg.width_fs, cfg.efficiency) for side, m in overlaps.items()}

    pts = _map_points(point, delays, cfg.jobs)
    # far beyond any scan: temporal overlap underflows to exactly 0
    far = 1e3 * cfg.width_fs
    baseline = {side: hom_coincidence(far, m, cfg.width_fs, cfg.efficiency) for side, m in overlaps.items()}
    columns = {f"p_{side}": [p[side] for p in pts] for side in overlaps}
    summary = {"baseline_" + s: baseline[s] for s in overlaps}
    for side in overlaps:
        scan = list(zip(delays, columns[f"p_{side}"]))
        summary[f"visibility_{side}"] = dip_visibility(scan, baseline[side])
        summary[f"min_{side}"] = min(columns[f"p_{side}"])
    sampled = None
    if cfg.mean_total_pairs is not None:
        sampled = {f"n_{side}": [] for side in overlaps}
        for i, p in enumerate(pts):
            rng = seed_stream(cfg.seed, i)
            for side in overlaps:
                sampled[f"n_{side}"].append(int(rng.poisson(p[side] * cfg.mean_total_pairs)))
    return ScanResult("delay_fs", delays, columns, sampled, summary)


# --- phase scan ------------------------------------------------------------

def run_phase_scan(cfg: ScenarioConfig) -> ScanResult:
    """All four cross-side coincidence probabilities vs the piezo phase."""
    phis = _grid(cfg.phi_start_deg, cfg.phi_stop_deg, cfg.phi_step_deg)

    def point(i, phi_deg):
        return coincidence_channels(cfg, math.radians(phi_deg), cfg.analyzer_alice_deg, cfg.analyzer_bob_deg)

    pts = _map_points(point, phis, cfg.jobs)
    columns = {f"p_{ch}": [p[o] for p in pts] for ch, o in zip(CHANNELS, OUTCOMES)}
    summary: dict[str, Any] = {}
    radians = [math.radians(x) for x in phis]
    try:
        for ch in CHANNELS:
            fit = fit_fringe(list(zip(radians, columns[f"p_{ch}"])))
            summary[f"visibility_{ch}"] = fit.visibility
            summary[f"phase0_{ch}_deg"] = math.degrees(fit.phase0)
        summary["phi0_deg"] = summary["phase0_d1d3_deg"]
    except ValueError as exc:
        summary["fit_error"] = str(exc)
    sampled = None
    if cfg.mean_total_pairs is not None:
        sampled = {f"n_{ch}": [] for ch in CHANNELS}
        for i, p in enumerate(pts):
            acc = math.fsum(p.values())
            table = sample_counts({k: v / acc for k, v in p.items()}, cfg.mean_total_pairs * acc,
                                  seed_stream(cfg.seed, i), cfg.accidental_rate)
            for ch, n in zip(CHANNELS, table.as_tuple()):
                sampled[f"n_{ch}"].append(n)
    return ScanResult("phi_deg", phis, columns, sampled, summary)


# --- chsh ------------------------------------------------------------------

@dataclass
class ChshRun:
    result: ChshResult
    analytic_s: float
    analytic_e: list[float]
    acceptance: list[float]
    phi_rad: float
    settings: tuple[MeasurementSetting, ...]


def chsh_distributions(cfg: ScenarioConfig, phi_rad: float) -> list[tuple[dict[str, float], float]]:
    """Post-selected channel probabilities and acceptance per setting."""
    out = []
    for s in cfg.settings:
        kept, acc = post_select(paper_distribution(cfg, phi_rad, s.alice_deg, s.bob_deg))
        out.append((coincidence_probabilities(kept), acc))
    return out


def run_chsh(cfg: ScenarioConfig, distributions=None) -> ChshRun:
    """Simulate, post-select and sample the four CHSH subexperiments.

    ``distributions`` may be passed in to reuse the noiseless part across
    many seeds.
    """
    phi = resolved_phi(cfg)
    dists = distributions if distributions is not None else chsh_distributions(cfg, phi)
    settings = cfg.settings
    signs = tuple(cfg.sign_vector) if cfg.sign_vector is not None else default_sign_vector(settings)
    mean = 5300.0 if cfg.mean_total_pairs is None else cfg.mean_total_pairs
    estimates = []
    for i, ((p, _), s) in enumerate(zip(dists, settings)):
        counts = sample_counts(p, mean, seed_stream(cfg.seed, i), cfg.accidental_rate, setting=s)
        if counts.total == 0:
            raise NumericalContractError(f"no sampled coincidences at setting {s}")
        estimates.append(correlation_from_counts(counts))
    analytic_e = [p["pp"] + p["mm"] - p["pm"] - p["mp"] for p, _ in dists]
    analytic_s = math.fsum(k * e for k, e in zip(signs, analytic_e))
    return ChshRun(chsh(estimates, signs), analytic_s, analytic_e, [a for _, a in dists], phi, settings)


def analytic_chsh(cfg: ScenarioConfig, phi_rad: float | None = None) -> float:
    """Infinite-statistics S from the post-selected channel probabilities."""
    phi = resolved_phi(cfg) if phi_rad is None else phi_rad
    signs = tuple(cfg.sign_vector) if cfg.sign_vector is not None else default_sign_vector(cfg.settings)
    es = [p["pp"] + p["mm"] - p["pm"] - p["mp"] for p, _ in chsh_distributions(cfg, phi)]
    return math.fsum(k * e for k, e in zip(signs, es))


def chsh_rows(run: ChshRun) -> list[list]:
    rows = []
    for s, est in zip(run.settings, run.result.estimates):
        rows.append([s.alice_deg, s.bob_deg, *est.counts.as_tuple(), est.e_value, est.sigma])
    return rows


CHSH_HEADER = ["alice_deg", "bob_deg", "n_pp", "n_pm", "n_mp", "n_mm", "e", "sigma"]


# --- analyze ---------------------------------------------------------------

def table1_path() -> Path:
    return Path(str(resources.files("photon_bell") / "data" / "table1.csv"))


def read_table(path: str | Path) -> tuple[list[MeasurementSetting], list[CorrelationEstimate]]:
    """Read four rows of either (angles, counts) or (angles, e, sigma)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    fields = set(reader.fieldnames or ())
    has_counts = {"n_pp", "n_pm", "n_mp", "n_mm"} <= fields
    if not {"alice_deg", "bob_deg"} <= fields or not (has_counts or {"e", "sigma"} <= fields):
        raise ConfigError(f"{path}: need alice_deg, bob_deg and either n_pp..n_mm or e, sigma columns")
    settings, estimates = [], []
    try:
        for row in reader:
            settings.append(MeasurementSetting(float(row["alice_deg"]), float(row["bob_deg"])))
            if has_counts:
                counts = CountsTable(*(int(row[f"n_{o}"]) for o in OUTCOMES), setting=settings[-1])
                estimates.append(correlation_from_counts(counts))
            else:
                estimates.append(CorrelationEstimate(float(row["e"]), float(row["sigma"])))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed row: {exc}") from exc
    if len(estimates) != 4:
        raise ConfigError(f"{path}: expected 4 data rows, found {len(estimates)}")
    return settings, estimates


def run_analyze(cfg: ScenarioConfig) -> ChshResult:
    settings, estimates = read_table(cfg.input or table1_path())
    try:
        signs = tuple(cfg.sign_vector) if cfg.sign_vector is not None else default_sign_vector(settings)
        return chsh(estimates, signs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# --- state check -----------------------------------------------------------

def run_state_check(cfg: ScenarioConfig) -> dict[str, Any]:
    """45/45 correlation and fidelity of the conditional state with the target."""
    phi = resolved_phi(cfg)
    circ = paper_interferometer(phi, cfg.delay1_fs, cfg.delay2_fs, cfg.delay3_fs,
                                None, None, cfg.mode_overlap, cfg.width_fs)
    out, _ = evolve(circ, paper_source())
    ens = conditional_polarization_ensemble(out, SIDES)
    phi0 = calibrate_phase_offset(cfg)
    target_rad = phi if cfg.phi_target_deg is None else math.radians(cfg.phi_target_deg)
    target = psi_state(target_rad + phi0)
    fid = ensemble_fidelity(ens, target)
    e45 = analytic_correlation(ens, MeasurementSetting(45.0, 45.0))
    return {
        "phi_deg": math.degrees(phi),
        "phi0_deg": math.degrees(phi0),
        "phi_target_deg": math.degrees(target_rad),
        "e_45_45": e45,
        "fidelity": fid,
        "threshold": cfg.fidelity_threshold,
        "pass": fid >= cfg.fidelity_threshold,
    }


# --- output ----------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence], config: dict) -> None:
    """CSV with the resolved config embedded as leading comment lines."""
    buf = io.StringIO()
    buf.write("# photon_bell " + config.get("scenario", "") + "\n")
    for line in json.dumps(config, sort_keys=True, indent=1).splitlines():
        buf.write("# " + line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue())


def write_svg(path: Path, x: Sequence[float], series: dict[str, Sequence[float]], xlabel: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "photon_bell"
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, ys in series.items():
        ax.plot(x, ys, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("probability")
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def as_jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj
