"""Selection rules and the JSON layer: every derived knob frozen once."""

import json
from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meandimlab.config import (
    resolve_marker,
    HORIZON_CAP,
    ExperimentConfig,
    config_to_json,
    default_config,
    dyadic_below,
    load_config,
    parse_config,
    pick_arc,
    resolve,
    save_config,
    select_factor_numbers,
)
from meandimlab.dynsys import ConfigurationError, SystemSpec
from meandimlab.signal import GammaVariant
from meandimlab.tiling import scale_floor


# ---------------------------------------------------------------------------
# the derivation chain of the reference run, frozen end to end
#
# Oracle notes (by hand from the stated rules):
#   eps/2 = 0.125, decay 0.5 -> memory tau = 3, so the cover bound at
#   horizon n is D*(n + 2*tau) + 1 = n + 7; its ratio bottoms out at
#   n = 12 with 19/12.  First horizon with (n+7)/n < 19/12 + 1 is n = 5.
#   m = floor(2.5833/0.2) + 1 = 13; delta' = 0.9*min(31/312, 0.1);
#   c is the largest 1 + j/64 under 1/(1 - delta').


def test_default_numbers_frozen():
    nums = select_factor_numbers(default_config())
    assert nums.eps_half == 0.125
    assert nums.pattern == {n: n + 7 for n in range(1, HORIZON_CAP + 1)}
    assert nums.mdim_half_upper == pytest.approx(19 / 12)
    assert nums.last_slope == 1.0
    assert nums.n_horizon == 5
    assert nums.m == 13
    assert nums.delta_prime == pytest.approx(0.9 * 31 / 312)
    assert nums.delta_prime == 0.08942307692307692
    assert nums.r == 39.0
    assert nums.c == 1.09375  # 1 + 6/64


def test_default_marker_and_tiling_frozen():
    res = resolve(default_config())
    assert scale_floor(39.0, res.numbers.delta_prime, 1.09375) == 1742.0
    assert res.mspec.arc_radius == Fraction(126014468, 10**12)
    assert res.mspec.inner_radius == Fraction(126014468, 2 * 10**12)
    assert (res.mspec.M, res.mspec.M1) == (2584, 5474)
    assert res.K == 10950
    assert res.tparams.H == (5474 + 1) ** 2
    assert res.tparams.margin == 3 * 5475
    assert res.fiber_bound == pytest.approx(12 / 65)
    assert res.sparams.m == 13 and res.sparams.R == 39.0


def test_explicit_arc_passthrough():
    # explicit arcs skip the scan; the resulting M is far below the default
    # tiling floor, so only the marker step is exercised here
    cfg = default_config(
        arc_radius=Fraction(1, 400), inner_radius=Fraction(1, 800)
    )
    nums = select_factor_numbers(cfg)
    mspec = resolve_marker(cfg, nums)
    assert (mspec.M, mspec.M1) == (144, 306)
    with pytest.raises(ConfigurationError):
        resolve(cfg)  # the default tiling floor rejects this M


def test_pick_arc_scans_the_stated_range():
    sys = SystemSpec()
    # by hand: |k*theta| numerators for k = 1..3 are 381966011251,
    # 236067977498, 145898033753; the last is smallest.
    assert pick_arc(sys, 3) == (145898033753, 3, 65654115188)
    assert pick_arc(sys, 1) == (381966011251, 1, 171884705062)
    # the golden continued fraction puts the next record at k = 1597
    min_num, k, arc = pick_arc(sys, 1742.0)
    assert (min_num, k) == (280032153, 1597)
    assert arc == (9 * 280032153) // 20 == 126014468
    with pytest.raises(ConfigurationError):
        pick_arc(sys, 0.5)


# ---------------------------------------------------------------------------
# dyadic slice ratios


def test_dyadic_below_examples():
    assert dyadic_below(1.0982) == 1.09375
    assert dyadic_below(1.01) == 1.0078125  # needs one step halving
    assert dyadic_below(1.5) == 1.484375
    # strictness: the cap itself is never returned
    assert dyadic_below(1.0 + 6 / 64) == 1.0 + 5 / 64


def test_dyadic_below_tiny_and_invalid():
    out = dyadic_below(1.0 + 1e-10)
    assert 1.0 < out < 1.0 + 1e-10 + 1e-15
    with pytest.raises(ConfigurationError):
        dyadic_below(1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=1.000001, max_value=3.0))
def test_dyadic_below_is_dyadic_and_strict(cap):
    out = dyadic_below(cap)
    assert 1.0 < out < cap
    assert out == 1.0 + round((out - 1.0) * 2**46) / 2**46


# ---------------------------------------------------------------------------
# knob validation


def test_config_rejects_bad_budgets():
    with pytest.raises(ConfigurationError):
        default_config(delta=0.0)
    with pytest.raises(ConfigurationError):
        default_config(delta=1.0)
    with pytest.raises(ConfigurationError):
        default_config(eps=1.0)
    with pytest.raises(ConfigurationError):
        default_config(arc_center=0.5)  # not a Fraction
    with pytest.raises(ConfigurationError):
        default_config(sample_count=0)


def test_selection_rejects_out_of_range_overrides():
    with pytest.raises(ConfigurationError):
        select_factor_numbers(default_config(n_horizon=HORIZON_CAP + 1))
    with pytest.raises(ConfigurationError):
        select_factor_numbers(default_config(m=1))
    with pytest.raises(ConfigurationError):
        select_factor_numbers(default_config(delta_prime=0.11))  # above cap
    with pytest.raises(ConfigurationError):
        select_factor_numbers(default_config(tiling_c=1.2))  # above 1/(1-d')
    with pytest.raises(ConfigurationError):
        select_factor_numbers(default_config(tiling_r=-3.0))


def test_selection_respects_pinned_overrides():
    nums = select_factor_numbers(
        default_config(n_horizon=7, m=20, delta_prime=0.05, tiling_c=1.05)
    )
    assert (nums.n_horizon, nums.m) == (7, 20)
    assert nums.delta_prime == 0.05 and nums.c == 1.05
    assert nums.r == 60.0


# ---------------------------------------------------------------------------
# JSON layer


def test_json_round_trip_default():
    cfg = default_config()
    assert parse_config(config_to_json(cfg)) == cfg


def test_json_round_trip_pinned():
    cfg = default_config(
        arc_radius=Fraction(1, 400),
        inner_radius=Fraction(1, 800),
        n_horizon=4,
        m=6,
        delta_prime=0.05,
        tiling_r=18.0,
        tiling_c=1.25,
        gamma_variant=GammaVariant.MIN_AT_ZERO,
        sample_count=24,
        seed=7,
        out_dir="results",
    )
    doc = config_to_json(cfg)
    assert doc["marker"]["arc_radius"] == "1/400"
    assert doc["factor"]["gamma_variant"] == "min-at-zero"
    assert parse_config(doc) == cfg


def test_save_and_load(tmp_path):
    cfg = default_config(seed=3)
    path = tmp_path / "cfg.json"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_parse_rejections():
    good = config_to_json(default_config())
    bad = dict(good, schema="meandimlab/v2")
    with pytest.raises(ConfigurationError):
        parse_config(bad)
    with pytest.raises(ConfigurationError):
        parse_config(dict(good, plotting={}))
    missing_delta = json.loads(json.dumps(good))
    del missing_delta["tiling"]["delta"]
    with pytest.raises(ConfigurationError):
        parse_config(missing_delta)
    missing_eps = json.loads(json.dumps(good))
    del missing_eps["factor"]["eps"]
    with pytest.raises(ConfigurationError):
        parse_config(missing_eps)
    with pytest.raises(ConfigurationError):
        parse_config("not a dict")
    bad_frac = json.loads(json.dumps(good))
    bad_frac["marker"]["arc_radius"] = "one four-hundredth"
    with pytest.raises(ConfigurationError):
        parse_config(bad_frac)
    bad_variant = json.loads(json.dumps(good))
    bad_variant["factor"]["gamma_variant"] = "tilted"
    with pytest.raises(ConfigurationError):
        parse_config(bad_variant)


def test_resolved_to_json_serializes():
    doc = resolve(default_config()).to_json()
    text = json.dumps(doc, sort_keys=True)
    again = json.loads(text)
    assert again["M"] == 2584 and again["pattern"]["5"] == 12
    assert again["fiber_bound"] == pytest.approx(12 / 65)
