import cmath
import math
import random

import numpy as np
import pytest

from photon_bell.circuit import (
    ALICE_RAILS,
    BOB_RAILS,
    HOM_DETECTORS,
    PAPER_DETECTORS,
    BeamSplitter,
    Circuit,
    Delay,
    HalfWavePlate,
    PhaseShift,
    PolarizingBS,
    Polarizer,
    element_matrix,
    evolve,
    hom_test_circuit,
    mode_index,
    paper_interferometer,
    transfer_matrix,
)
from photon_bell.detection import CoincidenceRule, conditional_polarization_ensemble, outcome_distribution
from photon_bell.bell import analytic_correlation, MeasurementSetting
from photon_bell.state import FockState, ModeLabel, apply_beamsplitter, make_source_state

from oracles import boson_amplitude

R = 1 / math.sqrt(2)
SIDES = CoincidenceRule(ALICE_RAILS, BOB_RAILS)


def M(path, pol, t=0):
    return ModeLabel(path, pol, t)


def random_lossless_circuit(rng, paths, n_max=12):
    els = []
    for _ in range(rng.randint(0, n_max)):
        kind = rng.choice(["bs", "pbs", "hwp", "phase", "delay0"])
        p, q = rng.sample(paths, 2)
        if kind == "bs":
            els.append(BeamSplitter(p, q, rng.random()))
        elif kind == "pbs":
            els.append(PolarizingBS(p, q))
        elif kind == "hwp":
            els.append(HalfWavePlate(p, rng.uniform(-180, 180)))
        elif kind == "phase":
            els.append(PhaseShift(p, rng.uniform(-7, 7)))
        else:
            els.append(Delay(p, 0.0))
    return Circuit(tuple(paths), tuple(els))


def state_vector(state, paths):
    idx = mode_index(paths)
    v = np.zeros(2 * len(paths), dtype=complex)
    for key, amp in state:
        (m,) = key
        v[idx[m.path, m.pol]] += amp
    return v


# --- evolve ----------------------------------------------------------------

def test_empty_circuit_identity():
    s = make_source_state("PhiPlusSign", ("a", "b"))
    out, p = evolve(Circuit(("a", "b")), s)
    assert p == 1.0 and dict(out.terms) == dict(s.terms)


def test_single_bs_circuit_matches_direct_application():
    s = FockState.single_photon(("a", "b"), "a", "V")
    out, _ = evolve(Circuit(("a", "b"), (BeamSplitter("a", "b", 0.3),)), s)
    assert dict(out.terms) == dict(apply_beamsplitter(s, "a", "b", 0.3).terms)


def test_undeclared_path_in_state():
    with pytest.raises(ValueError):
        evolve(Circuit(("a",)), FockState.single_photon(("q",), "q", "H"))


def test_circuit_rejects_undeclared_element_path():
    with pytest.raises(ValueError):
        Circuit(("a",), (HalfWavePlate("b", 0.0),))


def test_polarizer_survival_probability():
    s = make_source_state("PhiPlusSign", ("a", "b"))
    out, p = evolve(Circuit(("a", "b"), (Polarizer("a", "V"), Polarizer("b", "V"))), s)
    assert p == pytest.approx(0.5)
    assert out.norm() == pytest.approx(1.0)


# --- transfer matrix -------------------------------------------------------

def test_bs_matrix_block():
    u = transfer_matrix(Circuit(("a", "b"), (BeamSplitter("a", "b", 0.5),)))
    idx = mode_index(("a", "b"))
    for pol in "HV":
        block = u[np.ix_([idx["a", pol], idx["b", pol]], [idx["a", pol], idx["b", pol]])]
        np.testing.assert_allclose(block, np.array([[1, 1j], [1j, 1]]) / math.sqrt(2), atol=1e-15)


def test_hwp_matrix_block():
    u = element_matrix(HalfWavePlate("a", 22.5), ("a",))
    np.testing.assert_allclose(u, np.array([[R, R], [R, -R]]), atol=1e-15)


def test_two_cascaded_bs_swap_with_phase():
    c = Circuit(("a", "b"), (BeamSplitter("a", "b"), BeamSplitter("a", "b")))
    u = transfer_matrix(c)
    s = FockState.single_photon(("a", "b"), "a", "H")
    out, _ = evolve(c, s)
    assert out.amplitude([M("b", "H")]) == pytest.approx(1j, abs=1e-12)
    np.testing.assert_allclose(state_vector(out, c.paths), u @ state_vector(s, c.paths), atol=1e-12)


def test_transfer_matrix_rejects_polarizer():
    with pytest.raises(ValueError):
        transfer_matrix(Circuit(("a",), (Polarizer("a", "H"),)))


def test_transfer_matrix_rejects_nontrivial_delay():
    with pytest.raises(ValueError):
        transfer_matrix(Circuit(("a",), (Delay("a", 50.0),)))


@pytest.mark.parametrize("seed", range(20))
def test_single_photon_evolve_matches_transfer_matrix(seed):
    rng = random.Random(seed)
    paths = ["p0", "p1", "p2"]
    c = random_lossless_circuit(rng, paths)
    u = transfer_matrix(c)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(6), atol=1e-10)
    for path in paths:
        for pol in "HV":
            s = FockState.single_photon(tuple(paths), path, pol)
            out, _ = evolve(c, s)
            np.testing.assert_allclose(state_vector(out, paths), u @ state_vector(s, paths), atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_two_photon_evolve_matches_permanents(seed):
    rng = random.Random(100 + seed)
    paths = ["p0", "p1", "p2"]
    c = random_lossless_circuit(rng, paths)
    u = transfer_matrix(c)
    idx = mode_index(paths)
    modes = list(idx)
    m_in = rng.sample(modes, 2) if seed % 3 else [modes[0], modes[0]]
    s = FockState(tuple(paths), {tuple(M(p, pol) for p, pol in m_in): 1.0})
    out, _ = evolve(c, s)
    for i in range(len(modes)):
        for j in range(i, len(modes)):
            expected = boson_amplitude(u, [idx[m] for m in m_in], [i, j])
            got = out.amplitude([M(*modes[i]), M(*modes[j])])
            assert got == pytest.approx(expected, abs=1e-12)


# --- paper interferometer --------------------------------------------------

SRC = make_source_state("VVInput", ("a1", "a2"))


@pytest.mark.parametrize("phi", [0.0, 0.9, 2.5])
def test_expansion_before_recombination(phi):
    # HWP, prism 2, BS1, BS2, piezo phase
    out, _ = evolve(paper_interferometer(phi).truncated(5), SRC)
    e = cmath.exp(1j * phi)
    expected = {
        (M("a1", "H"), M("a2", "V")): 0.5,
        (M("b1", "H"), M("b2", "V")): -0.5 * e,
        (M("a1", "H"), M("b2", "V")): 0.5j * e,
        (M("a2", "V"), M("b1", "H")): 0.5j,
    }
    assert len(out) == 4
    for modes, amp in expected.items():
        assert out.amplitude(modes) == pytest.approx(amp, abs=1e-12)


@pytest.mark.parametrize("phi", np.linspace(0, 2 * np.pi, 7))
def test_same_side_probability_half(phi):
    out, _ = evolve(paper_interferometer(phi, analyzer_alice_deg=30, analyzer_bob_deg=-10), SRC)
    dist = outcome_distribution(out, PAPER_DETECTORS)
    cross = sum(p for pat, p in dist.items() if CoincidenceRule().accepts(pat))
    same = sum(p for pat, p in dist.items() if set(pat) <= {"D1", "D2"} or set(pat) <= {"D3", "D4"})
    assert same == pytest.approx(0.5, abs=1e-12)
    assert cross == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("phi", np.linspace(0, 2 * np.pi, 5))
def test_marginals_uniform(phi):
    out, _ = evolve(paper_interferometer(phi), SRC)
    (w, v), = conditional_polarization_ensemble(out, SIDES)
    p = np.abs(v.reshape(2, 2)) ** 2
    np.testing.assert_allclose(p.sum(axis=1), [0.5, 0.5], atol=1e-10)
    np.testing.assert_allclose(p.sum(axis=0), [0.5, 0.5], atol=1e-10)


def test_large_prism2_delay_kills_phase_dependence():
    es = []
    for phi in (0.0, math.pi / 2, math.pi):
        out, _ = evolve(paper_interferometer(phi, delay2_fs=1e5), SRC)
        ens = conditional_polarization_ensemble(out, SIDES)
        es.append(analytic_correlation(ens, MeasurementSetting(45, 45)))
    np.testing.assert_allclose(es, 0.0, atol=1e-12)


def test_global_phase_invariance():
    c = paper_interferometer(0.4, analyzer_alice_deg=20, analyzer_bob_deg=70)
    base = outcome_distribution(evolve(c, SRC)[0], PAPER_DETECTORS)
    rotated = FockState(SRC.paths, {k: a * cmath.exp(1.3j) for k, a in SRC})
    other = outcome_distribution(evolve(c, rotated)[0], PAPER_DETECTORS)
    assert base.keys() == other.keys()
    for k in base:
        assert other[k] == pytest.approx(base[k], abs=1e-14)


def test_paper_interferometer_is_unitary_when_ideal():
    u = transfer_matrix(paper_interferometer(0.3, analyzer_alice_deg=22.5, analyzer_bob_deg=45))
    np.testing.assert_allclose(u.conj().T @ u, np.eye(8), atol=1e-10)


# --- HOM bench -------------------------------------------------------------

def hom_coinc(delay, width=100.0, overlap=1.0):
    src = FockState(("x", "y"), {(M("x", "V"), M("y", "V")): 1.0})
    out, _ = evolve(hom_test_circuit(delay, overlap, width), src)
    return outcome_distribution(out, HOM_DETECTORS).get(frozenset({"P1", "P2"}), 0.0)


def test_hom_null_and_asymptote():
    assert hom_coinc(0.0) <= 1e-12
    assert hom_coinc(1e6) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("tau", [-300.0, -80.0, 25.0, 100.0, 200.0, 410.0])
def test_hom_closed_form(tau):
    sigma = 100.0
    assert hom_coinc(tau, sigma) == pytest.approx(0.5 * (1 - math.exp(-tau**2 / (2 * sigma**2))), abs=1e-12)


def test_hom_mode_overlap_sets_dip_depth():
    assert hom_coinc(0.0, overlap=0.961) == pytest.approx(0.5 * (1 - 0.961**2), abs=1e-12)
