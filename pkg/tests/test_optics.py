import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsobridge.optics import (
    ALIGNED,
    BeamTruncationError,
    FiberKind,
    FiberSpec,
    GaussianBeam,
    LensSpec,
    Misalignment,
    collimate,
    encircled_fraction,
    facet_misalignment,
    focused_numerical_aperture,
    focused_spot_radius,
    lateral_offset_from_angle,
    marcuse_mode_radius,
    mmf_coupling_efficiency,
    na_acceptance,
    offset_for_loss,
    propagate,
    smf_coupling_efficiency,
)
from oracles import encircled_2d, smf_overlap_2d

LAM = 1550e-9
LENS = LensSpec(0.1, 50.8e-3)


def test_marcuse_radius_for_9um_na012():
    # V = 2.189 at 1550 nm
    v = 2 * math.pi * 4.5e-6 * 0.12 / LAM
    assert v == pytest.approx(2.1890, abs=1e-4)
    assert marcuse_mode_radius(4.5e-6, 0.12, LAM) == pytest.approx(5.292e-6, rel=1e-3)


def test_collimated_waist_and_far_field():
    beam = collimate(5.2e-6, LAM, LENS)
    assert beam.waist_radius == pytest.approx(9.488e-3, rel=1e-3)
    assert propagate(beam, 63.0).radius == pytest.approx(10.04e-3, rel=2e-3)


def test_propagation_composes():
    beam = GaussianBeam(LAM, 2e-3)
    once = propagate(beam, 70.0)
    twice = propagate(propagate(beam, 30.0), 40.0)
    assert once.radius == pytest.approx(twice.radius, rel=1e-14)


def test_radius_follows_hyperbola():
    beam = GaussianBeam(LAM, 1e-3)
    z = 3 * beam.rayleigh_range
    assert propagate(beam, z).radius == pytest.approx(1e-3 * math.sqrt(10), rel=1e-12)


def test_truncation_raises():
    with pytest.raises(BeamTruncationError):
        collimate(0.2e-6, LAM, LensSpec(0.1, 10e-3))


def test_negative_distance_rejected():
    with pytest.raises(ValueError):
        propagate(GaussianBeam(LAM, 1e-3), -1.0)


def test_fiber_spec_validation():
    with pytest.raises(ValueError):
        FiberSpec(FiberKind.SINGLE_MODE, 9e-6, 0.12)
    with pytest.raises(ValueError):
        FiberSpec(FiberKind.MULTI_MODE, 105e-6, 0.22, mode_field_radius=5e-6)
    with pytest.raises(ValueError):
        FiberSpec(FiberKind.MULTI_MODE, 105e-6, 1.2)
    smf = FiberSpec.single_mode(9e-6, 0.12, LAM)
    assert smf.mode_field_radius == pytest.approx(marcuse_mode_radius(4.5e-6, 0.12, LAM))


def test_paraxial_limit():
    assert lateral_offset_from_angle(1e-4, 63.0) == pytest.approx(6.3e-3)
    with pytest.raises(ValueError):
        lateral_offset_from_angle(0.02, 63.0)


def test_focused_spot_and_na_for_paper_geometry():
    w_rx = propagate(collimate(marcuse_mode_radius(4.5e-6, 0.12, LAM), LAM, LENS), 63.0).radius
    assert w_rx == pytest.approx(9.90e-3, rel=2e-3)
    assert focused_spot_radius(w_rx, 0.1, LAM) == pytest.approx(4.98e-6, rel=2e-3)
    assert focused_numerical_aperture(w_rx, 0.1) == pytest.approx(0.0985, rel=2e-3)


def test_facet_mapping_4f():
    mis = facet_misalignment(-1e-4, 63.0, 0.1)
    assert mis.lateral_offset == pytest.approx(1e-5)
    assert mis.angular_error == pytest.approx(0.063)


def test_smf_mode_matched_aligned_is_unity():
    assert smf_coupling_efficiency(5e-6, 5e-6, ALIGNED, LAM) == pytest.approx(1.0, abs=1e-15)


def test_smf_mode_mismatch_closed_form():
    assert smf_coupling_efficiency(4e-6, 6e-6) == pytest.approx((2 * 24 / 52) ** 2)


@pytest.mark.parametrize("case", range(100))
def test_smf_overlap_matches_2d_integration(case):
    rng = np.random.default_rng(1000 + case)
    w1, w2 = rng.uniform(2e-6, 10e-6, 2)
    d = rng.uniform(0, 1.5) * max(w1, w2)
    tilt = rng.uniform(0, 0.06)
    mis = Misalignment(d, tilt)
    closed = smf_coupling_efficiency(w1, w2, mis, LAM)
    assert closed == pytest.approx(smf_overlap_2d(w1, w2, d, tilt, LAM), rel=1e-6)


@pytest.mark.parametrize("case", range(100))
def test_encircled_fraction_matches_2d_integration(case):
    rng = np.random.default_rng(5000 + case)
    w = rng.uniform(2e-6, 60e-6)
    a = rng.uniform(5e-6, 60e-6)
    d = rng.uniform(0, a + w)
    closed = encircled_fraction(w, a, d)
    assert closed == pytest.approx(encircled_2d(w, a, d), rel=1e-6)


def test_encircled_centred_closed_form():
    w, a = 10e-6, 12e-6
    assert encircled_fraction(w, a) == pytest.approx(1 - math.exp(-2 * a**2 / w**2), rel=1e-12)


def test_encircled_vectorised():
    d = np.linspace(0, 80e-6, 9)
    out = encircled_fraction(5e-6, 52.5e-6, d)
    assert out.shape == d.shape
    assert np.all(np.diff(out) <= 0)


def test_na_acceptance_shape():
    assert na_acceptance(0.1, 0.0, 0.22) == 1.0
    margin = math.asin(0.22) - math.asin(0.1)
    assert na_acceptance(0.1, margin * 0.999, 0.22) == 1.0
    assert na_acceptance(0.1, margin + math.asin(0.1) / 2, 0.22) == pytest.approx(0.5)
    assert na_acceptance(0.1, margin + math.asin(0.1) * 1.01, 0.22) == 0.0
    # zero-width cone acts as a hard step
    assert na_acceptance(0.0, 0.2, 0.22) == 1.0
    assert na_acceptance(0.0, 0.3, 0.22) == 0.0


def test_mmf_rejects_single_mode_aperture():
    with pytest.raises(ValueError):
        mmf_coupling_efficiency(5e-6, FiberSpec.single_mode(9e-6, 0.12, LAM))


def test_mmf_aligned_capture_is_near_total():
    clad = FiberSpec(FiberKind.DCF_INNER_CLADDING, 105e-6, 0.22)
    assert mmf_coupling_efficiency(5e-6, clad, ALIGNED, 0.0985) == pytest.approx(1.0, abs=1e-12)


def test_tolerance_ratio_paper_geometry():
    mfr = marcuse_mode_radius(4.5e-6, 0.12, LAM)
    spot = focused_spot_radius(propagate(collimate(mfr, LAM, LENS), 63.0).radius, 0.1, LAM)
    clad = FiberSpec(FiberKind.DCF_INNER_CLADDING, 105e-6, 0.22)
    d_smf = offset_for_loss(lambda d: smf_coupling_efficiency(spot, mfr, Misalignment(d, 0.0), LAM), 3.0, 1e-4)
    d_mmf = offset_for_loss(lambda d: mmf_coupling_efficiency(spot, clad, Misalignment(d, 0.0), 0.0985), 3.0, 1e-3)
    # SMF: exp(-2 d^2 / (w1^2 + w2^2)) = 10^-0.3
    assert d_smf == pytest.approx(math.sqrt(0.3 * math.log(10) * (spot**2 + mfr**2) / 2), rel=1e-9)
    assert d_mmf / d_smf >= 10


@settings(max_examples=200, deadline=None)
@given(
    w1=st.floats(1e-6, 20e-6),
    w2=st.floats(1e-6, 20e-6),
    d=st.floats(0, 50e-6),
    tilt=st.floats(0, 0.2),
)
def test_smf_bounded_and_symmetric(w1, w2, d, tilt):
    mis = Misalignment(d, tilt)
    eta = smf_coupling_efficiency(w1, w2, mis, LAM)
    assert 0.0 <= eta <= 1.0
    assert eta == pytest.approx(smf_coupling_efficiency(w2, w1, mis, LAM), rel=1e-12)
    assert smf_coupling_efficiency(w1, w2, Misalignment(d * 1.1 + 1e-7, tilt), LAM) <= eta


@settings(max_examples=200, deadline=None)
@given(w=st.floats(1e-6, 50e-6), d=st.floats(0, 100e-6), tilt=st.floats(0, 0.3))
def test_mmf_bounded_and_monotone(w, d, tilt):
    clad = FiberSpec(FiberKind.DCF_INNER_CLADDING, 105e-6, 0.22)
    eta = mmf_coupling_efficiency(w, clad, Misalignment(d, tilt), 0.0985)
    assert 0.0 <= eta <= 1.0
    assert mmf_coupling_efficiency(w, clad, Misalignment(d + 1e-6, tilt), 0.0985) <= eta + 1e-15
    assert mmf_coupling_efficiency(w, clad, Misalignment(d, tilt + 1e-3), 0.0985) <= eta + 1e-15
