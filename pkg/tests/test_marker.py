import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, settings
from hypothesis import strategies as st

from meandimlab.dynsys import SystemSpec, make_point, sample_points
from meandimlab.marker import (
    MarkerConstructionError,
    check_coverage,
    check_separation,
    compute_M,
    compute_M_M1,
    gap_histogram,
    make_marker_spec,
    marker_sequence,
    phi_eval,
    phi_lipschitz_constant,
    phi_profile,
    pick_z_zprime,
)

SYS = SystemSpec(D=1, window_radius=64)

# Frozen return-time constants for the golden rotation, computed by an
# independent exact integer scan before these tests were written:
#   arc radius 1/100   -> M = 34   (|34 theta| ~ 0.01316 <= 0.02)
#   arc radius 1/400   -> M = 144, and with inner radius 1/800 -> M1 = 306
M_AT_1_OVER_100 = 34
M_AT_1_OVER_400 = 144
M1_AT_1_OVER_800 = 306


def test_M_frozen_values():
    assert compute_M(SYS, Fraction(1, 100)) == M_AT_1_OVER_100
    M, M1 = compute_M_M1(SYS, Fraction(1, 400), Fraction(1, 800))
    assert M == M_AT_1_OVER_400
    assert M1 == M1_AT_1_OVER_800
    assert M1 > M


def test_huge_arc_rejected():
    # an arc covering near-half the circle returns immediately: M = 1
    with pytest.raises(MarkerConstructionError):
        compute_M_M1(SYS, Fraction(1, 5), Fraction(1, 10))


def test_spec_construction_and_defaults():
    spec = make_marker_spec(SYS, arc_radius=Fraction(1, 400))
    assert spec.inner_radius == Fraction(1, 800)
    assert spec.M == M_AT_1_OVER_400
    assert spec.M1 == M1_AT_1_OVER_800


@pytest.fixture(scope="module")
def spec():
    return make_marker_spec(SYS, arc_radius=Fraction(1, 400))


def test_phi_endpoint_exactness(spec):
    z, zp = pick_z_zprime(spec)
    assert phi_eval(spec, z) == 1.0  # exact, inner-arc branch
    assert phi_eval(spec, zp) == 0.0  # exact, outside-outer branch


def test_phi_ramp_midpoint(spec):
    # circle point exactly midway along the ramp: phi = 0.5
    sys_ = spec.system
    mid2 = (spec.inner_num2 + spec.outer_num2) // 2  # even sum here
    x = make_point(sys_, circle=Fraction(mid2, 2 * sys_.q))
    assert phi_eval(spec, x) == pytest.approx(0.5, abs=1e-12)


def test_phi_profile_matches_pointwise(spec):
    x = sample_points(SYS, 1, seed=3)[0]
    prof = phi_profile(spec, x, -10, 10)
    for k in range(-10, 11):
        assert prof[k + 10] == phi_eval(spec, x.shifted(k))


def test_phi_shift_covariance(spec):
    x = sample_points(SYS, 1, seed=9)[0]
    a = phi_profile(spec, x.shifted(1), -5, 5)
    b = phi_profile(spec, x, -4, 6)
    np.testing.assert_array_equal(a, b)


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_phi_lipschitz(spec, seed):
    rng = np.random.default_rng(seed)
    sys_ = spec.system
    c1, c2 = int(rng.integers(0, sys_.q)), int(rng.integers(0, sys_.q))
    x1 = make_point(sys_, circle=Fraction(c1, sys_.q))
    x2 = make_point(sys_, circle=Fraction(c2, sys_.q))
    d = (c1 - c2) % sys_.q
    arc = min(d, sys_.q - d) / sys_.q
    slope = phi_lipschitz_constant(spec)
    assert abs(phi_eval(spec, x1) - phi_eval(spec, x2)) <= slope * arc + 1e-12


def test_marker_sequence_invariants(spec):
    xs = sample_points(SYS, 50, seed=202)
    L = 2 * spec.M1  # window half-length 4*M1 total
    for x in xs:
        seq = marker_sequence(spec, x, -L, L)
        ok, wit = check_separation(seq)
        assert ok, wit
        ok, wit = check_coverage(seq)
        assert ok, wit
        gaps = np.diff(seq.support)
        assert gaps.min(initial=spec.M) >= spec.M
        assert gaps.max(initial=0) <= 2 * spec.M1


def test_gap_histogram_counts(spec):
    x = sample_points(SYS, 1, seed=77)[0]
    seq = marker_sequence(spec, x, -3000, 3000)
    hist = gap_histogram(seq)
    assert sum(hist.values()) == len(seq.support) - 1
    assert min(hist) >= spec.M


def test_sequence_shift_relabels_support(spec):
    x = sample_points(SYS, 1, seed=5)[0]
    seq = marker_sequence(spec, x, -500, 500)
    shifted = seq.shifted(7)
    np.testing.assert_array_equal(shifted.support, seq.support - 7)
    direct = marker_sequence(spec, x.shifted(7), -507, 493)
    np.testing.assert_array_equal(direct.support, shifted.support)
    np.testing.assert_array_equal(direct.values, shifted.values)


def test_z_pair_distinct(spec):
    from meandimlab.dynsys import dist

    z, zp = pick_z_zprime(spec)
    assert dist(z, zp) > 0.4  # antipodal circle points
