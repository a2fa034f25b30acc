import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photon_bell.state import (
    FockState,
    ModeLabel,
    PostSelectionError,
    TemporalWavepacket,
    apply_beamsplitter,
    apply_hwp,
    apply_pbs,
    apply_phase,
    apply_polarizer,
    fidelity,
    make_source_state,
    set_delay,
    temporal_overlap,
)

from oracles import gaussian_overlap_quad

R = 1 / math.sqrt(2)


def M(path, pol, t=0):
    return ModeLabel(path, pol, t)


def two(paths, m1, m2, amp=1.0):
    return FockState(paths, {(m1, m2): amp})


# --- sources ---------------------------------------------------------------

def test_vv_input():
    s = make_source_state("VVInput", ("a1", "a2"))
    assert dict(s.terms) == {(M("a1", "V"), M("a2", "V")): 1.0}


def test_phi_plus_sign():
    s = make_source_state("PhiPlusSign", ("a1", "a2"))
    assert s.amplitude([M("a1", "H"), M("a2", "H")]) == pytest.approx(0.7071, abs=1e-4)
    assert s.amplitude([M("a1", "V"), M("a2", "V")]) == pytest.approx(0.7071, abs=1e-4)
    assert s.norm() == pytest.approx(1.0, abs=1e-15)


def test_phi_then_v_polarizers_gives_vv_half_the_time():
    s = make_source_state("PhiPlusSign", ("a1", "a2"))
    s, p1 = apply_polarizer(s, "a1", "V")
    s, p2 = apply_polarizer(s, "a2", "V")
    assert p1 * p2 == pytest.approx(0.5, abs=1e-15)
    assert fidelity(s, make_source_state("VVInput", ("a1", "a2"))) == pytest.approx(1.0, abs=1e-15)
    assert s.deficit == pytest.approx(0.5, abs=1e-15)


def test_identical_source_paths_rejected():
    with pytest.raises(ValueError):
        make_source_state("VVInput", ("a1", "a1"))


# --- beamsplitter ----------------------------------------------------------

def test_beamsplitter_single_photon():
    s = FockState.single_photon(("a", "b"), "a", "H")
    out = apply_beamsplitter(s, "a", "b", 0.5)
    assert out.amplitude([M("a", "H")]) == pytest.approx(R)
    assert out.amplitude([M("b", "H")]) == pytest.approx(1j * R)


def test_beamsplitter_vacuum_unchanged():
    s = FockState.vacuum(("a", "b"))
    assert dict(apply_beamsplitter(s, "a", "b", 0.3).terms) == {(): 1.0}


def test_hom_bunching():
    s = two(("a", "b"), M("a", "V"), M("b", "V"))
    out = apply_beamsplitter(s, "a", "b", 0.5)
    assert out.amplitude([M("a", "V"), M("b", "V")]) == 0
    # i/sqrt(2) on each bunched term
    assert out.amplitude([M("a", "V"), M("a", "V")]) == pytest.approx(1j * R)
    assert out.amplitude([M("b", "V"), M("b", "V")]) == pytest.approx(1j * R)


def test_beamsplitter_distinguishable_coincidence_half():
    s = two(("a", "b"), M("a", "V", 0), M("b", "V", 1))
    out = apply_beamsplitter(s, "a", "b", 0.5)
    coinc = sum(abs(a) ** 2 for k, a in out if {m.path for m in k} == {"a", "b"})
    assert coinc == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("r", [-0.1, 1.5])
def test_beamsplitter_bad_reflectivity(r):
    with pytest.raises(ValueError):
        apply_beamsplitter(FockState.vacuum(("a", "b")), "a", "b", r)


def test_missing_path_rejected():
    with pytest.raises(ValueError):
        apply_pbs(FockState.vacuum(("a",)), "a", "zz")


# --- PBS -------------------------------------------------------------------

def test_pbs_conventions():
    h = apply_pbs(FockState.single_photon(("a", "b"), "a", "H"), "a", "b")
    assert dict(h.terms) == {(M("a", "H"),): 1.0}
    v = apply_pbs(FockState.single_photon(("a", "b"), "a", "V"), "a", "b")
    assert v.amplitude([M("b", "V")]) == pytest.approx(1j)


def test_pbs_two_v_photons_no_bunching():
    s = two(("a", "b"), M("a", "V"), M("b", "V"))
    out = apply_pbs(s, "a", "b")
    assert len(out) == 1
    assert out.amplitude([M("a", "V"), M("b", "V")]) == pytest.approx(-1)


# --- wave plate and phase --------------------------------------------------

def test_hwp_zero():
    s = FockState.single_photon(("a",), "a", "V")
    assert apply_hwp(s, "a", 0.0).amplitude([M("a", "V")]) == pytest.approx(-1)
    s = FockState.single_photon(("a",), "a", "H")
    assert apply_hwp(s, "a", 0.0).amplitude([M("a", "H")]) == pytest.approx(1)


def test_hwp_22_5_makes_diagonal():
    s = apply_hwp(FockState.single_photon(("a",), "a", "H"), "a", 22.5)
    assert s.amplitude([M("a", "H")]) == pytest.approx(R)
    assert s.amplitude([M("a", "V")]) == pytest.approx(R)


def test_hwp_45_converts_v_to_h():
    s = apply_hwp(FockState.single_photon(("a",), "a", "V"), "a", 45.0)
    assert list(s.terms) == [(M("a", "H"),)]
    assert s.amplitude([M("a", "H")]) == pytest.approx(1)


@given(st.floats(-360, 360, allow_nan=False))
def test_hwp_involution(theta):
    s = make_source_state("PhiPlusSign", ("a", "b"))
    s2 = apply_hwp(apply_hwp(s, "a", theta), "a", theta)
    assert fidelity(s2, s) == pytest.approx(1.0, abs=1e-12)


def test_phase():
    s = FockState.single_photon(("a",), "a", "H")
    assert dict(apply_phase(s, "a", 0.0).terms) == dict(s.terms)
    assert apply_phase(s, "a", math.pi).amplitude([M("a", "H")]) == pytest.approx(-1)
    two_ph = two(("a",), M("a", "H"), M("a", "V"))
    assert apply_phase(two_ph, "a", 0.3).amplitude([M("a", "H"), M("a", "V")]) == pytest.approx(cmath.exp(0.6j))


# --- polarizer -------------------------------------------------------------

def test_polarizer_pass_through():
    s = FockState.single_photon(("a",), "a", "V")
    out, p = apply_polarizer(s, "a", "V")
    assert p == 1.0 and dict(out.terms) == dict(s.terms)


def test_polarizer_blocks_everything():
    with pytest.raises(PostSelectionError):
        apply_polarizer(FockState.single_photon(("a",), "a", "V"), "a", "H")


# --- temporal --------------------------------------------------------------

def test_overlap_identical():
    w = TemporalWavepacket(3.0, 80.0)
    assert temporal_overlap(w, w) == 1.0


@pytest.mark.parametrize("tau,sigma", [(0.0, 100.0), (50.0, 100.0), (150.0, 100.0), (-230.0, 70.0)])
def test_overlap_equal_widths_closed_form_and_quadrature(tau, sigma):
    w1, w2 = TemporalWavepacket(0.0, sigma), TemporalWavepacket(tau, sigma)
    closed = math.exp(-tau**2 / (4 * sigma**2))
    assert temporal_overlap(w1, w2) == pytest.approx(closed, rel=1e-12)
    assert temporal_overlap(w1, w2) == pytest.approx(gaussian_overlap_quad(0.0, sigma, tau, sigma), abs=1e-9)


@pytest.mark.parametrize("c1,s1,c2,s2", [(0, 50, 20, 120), (10, 200, -40, 90)])
def test_overlap_unequal_widths_quadrature(c1, s1, c2, s2):
    got = temporal_overlap(TemporalWavepacket(c1, s1), TemporalWavepacket(c2, s2))
    assert got == pytest.approx(gaussian_overlap_quad(c1, s1, c2, s2), abs=1e-9)
    assert got == pytest.approx(temporal_overlap(TemporalWavepacket(c2, s2), TemporalWavepacket(c1, s1)))


def test_overlap_far_apart():
    assert temporal_overlap(TemporalWavepacket(0, 100), TemporalWavepacket(1e5, 100)) == 0.0


def test_bad_width():
    with pytest.raises(ValueError):
        TemporalWavepacket(0.0, 0.0)


def test_delay_zero_is_identity():
    s = make_source_state("VVInput", ("a", "b"))
    assert set_delay(s, "a", TemporalWavepacket(), 0.0) is s


def test_delay_large_moves_to_orthogonal_component():
    s = make_source_state("VVInput", ("a", "b"))
    out = set_delay(s, "a", TemporalWavepacket(0, 100), 1e5)
    assert dict(out.terms) == {(M("a", "V", 1), M("b", "V")): 1.0}


def test_delay_splits_by_overlap():
    ref = TemporalWavepacket(0, 100)
    s = make_source_state("VVInput", ("a", "b"))
    out = set_delay(s, "a", ref, 120.0)
    g = math.exp(-(120.0**2) / (4 * 100.0**2))
    assert out.amplitude([M("a", "V", 0), M("b", "V")]) == pytest.approx(g)
    assert out.amplitude([M("a", "V", 1), M("b", "V")]) == pytest.approx(math.sqrt(1 - g * g))
    assert out.norm() == pytest.approx(1.0, abs=1e-12)


# --- fidelity --------------------------------------------------------------

def test_fidelity_basics():
    s = make_source_state("PhiPlusSign", ("a", "b"))
    assert fidelity(s, s) == pytest.approx(1.0)
    hh = two(("a", "b"), M("a", "H"), M("b", "H"))
    hv = two(("a", "b"), M("a", "H"), M("b", "V"))
    assert fidelity(hh, hv) == 0.0


def test_fidelity_mismatched_registers():
    with pytest.raises(ValueError):
        fidelity(FockState.vacuum(("a",)), FockState.vacuum(("b",)))


def test_prune_threshold():
    s = FockState(("a",), {(M("a", "H"),): 1.0, (M("a", "V"),): 1e-13})
    assert len(s) == 1


def test_undeclared_path_in_terms():
    with pytest.raises(ValueError):
        FockState(("a",), {(M("b", "H"),): 1.0})


# --- invariants ------------------------------------------------------------

ops = st.one_of(
    st.tuples(st.just("bs"), st.floats(0, 1)),
    st.tuples(st.just("pbs"), st.just(0.0)),
    st.tuples(st.just("hwp"), st.floats(-180, 180)),
    st.tuples(st.just("phase"), st.floats(-7, 7)),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(ops, st.booleans()), max_size=10))
def test_lossless_elements_preserve_norm_and_number(seq):
    s = make_source_state("PhiPlusSign", ("a", "b"))
    for (kind, x), flip in seq:
        p, q = ("a", "b") if flip else ("b", "a")
        if kind == "bs":
            s = apply_beamsplitter(s, p, q, x)
        elif kind == "pbs":
            s = apply_pbs(s, p, q)
        elif kind == "hwp":
            s = apply_hwp(s, p, x)
        else:
            s = apply_phase(s, p, x)
    assert s.norm() == pytest.approx(1.0, abs=1e-12)
    assert s.photon_numbers() == {2}


def test_states_are_immutable():
    s = make_source_state("VVInput", ("a", "b"))
    with pytest.raises(TypeError):
        s.terms[()] = 1.0
    np.testing.assert_equal(len(s), 1)
