import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from nwbreak import TimeSeriesSample
from nwbreak.breaktests import (
    TestConfig,
    TestOutcome,
    _holm,
    _to_normal_scale,
    approximate_pvalue,
    confidence_band_mean_diff,
    confidence_band_variance_diff,
    critical_value,
    gumbel_quantile,
    run_test,
    test_joint as joint_test,
    test_mean as mean_test,
    test_variance as variance_test,
)
from nwbreak.kernels import InvalidConfigurationError

from conftest import doubled, make_series


# --------------------------------------------------------- critical values


def _root(alpha):
    return brentq(lambda z: math.exp(-2 * math.exp(-z)) - (1 - alpha), -5, 30, xtol=1e-14)


def test_gumbel_quantile_examples():
    assert gumbel_quantile(1 - math.exp(-2)) == pytest.approx(0.0, abs=1e-12)
    for alpha in (0.05, 0.025):
        assert gumbel_quantile(alpha) == pytest.approx(_root(alpha), abs=1e-10)
    # commonly quoted four-decimal figures, which carry their own rounding
    assert gumbel_quantile(0.05) == pytest.approx(3.6631, abs=5e-4)
    assert gumbel_quantile(0.025) == pytest.approx(4.3679, abs=2e-3)


@given(st.floats(1e-6, 0.999))
def test_gumbel_quantile_forward(alpha):
    z = gumbel_quantile(alpha)
    assert math.exp(-2 * math.exp(-z)) == pytest.approx(1 - alpha, abs=1e-10)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 2.0])
def test_gumbel_quantile_domain(alpha):
    with pytest.raises(ValueError):
        gumbel_quantile(alpha)


def test_critical_value_examples():
    a = math.sqrt(2 * math.log(10))
    assert a == pytest.approx(2.1460, abs=1e-4)
    base = a - (math.log(math.log(10)) + math.log(2 * math.sqrt(math.pi))) / a
    assert critical_value(10, 0.0) == pytest.approx(base, abs=1e-12)
    assert critical_value(10, 0.0) == pytest.approx(1.1677, abs=2e-4)
    assert critical_value(10, 3.6631) == pytest.approx(base + 3.6631 / a, abs=1e-12)
    assert critical_value(10, 3.6631) == pytest.approx(2.8746, abs=2e-4)
    with pytest.raises(ValueError):
        critical_value(1, 0.0)


def _increasing_in_m(m, z):
    # sign of dB/da with a^2 = 2 log m: B grows with m iff this is positive
    return 2 * math.log(m) + math.log(math.log(m)) + math.log(2 * math.sqrt(math.pi)) - 2 - z > 0


@given(st.integers(3, 10**6), st.floats(-5, 10))
def test_critical_value_monotone(m, z):
    assert critical_value(m, z + 0.1) > critical_value(m, z)
    if _increasing_in_m(m, z):
        assert critical_value(m + 1, z) > critical_value(m, z)
    elif not _increasing_in_m(m + 1, z):
        assert critical_value(m + 1, z) <= critical_value(m, z)


def test_critical_value_increasing_at_working_levels():
    zs = [gumbel_quantile(a) for a in (0.2, 0.1, 0.05, 0.025)]
    for z in zs:
        vals = [critical_value(m, z) for m in range(10, 3000)]
        assert np.all(np.diff(vals) > 0)


@given(st.integers(2, 10**4), st.floats(0.001, 0.5))
def test_pvalue_inverts_critical_value(m, alpha):
    stat = critical_value(m, gumbel_quantile(alpha))
    assert approximate_pvalue(stat, m) == pytest.approx(alpha, rel=1e-8)


def test_normal_scale_mapping():
    t = np.array([0.0, 1.0, 2.5, 4.0])
    np.testing.assert_allclose(_to_normal_scale(t, np.full(4, 1e9)), t, atol=1e-6)
    z = _to_normal_scale(t, np.full(4, 8.0))
    assert z[0] == 0.0
    assert np.all(z[1:] < t[1:])
    assert np.all(np.diff(z) > 0)


# ----------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(InvalidConfigurationError):
        TestConfig(alpha=1.0)
    with pytest.raises(InvalidConfigurationError):
        TestConfig(variance_assumption="pooled")
    with pytest.raises(InvalidConfigurationError):
        TestConfig(target="median")
    assert TestConfig().replace(alpha=0.1).alpha == 0.1
    assert TestConfig().to_dict()["bandwidth"]["mode"] == "rule_of_thumb"


# ------------------------------------------------------------------ tests


def test_identical_halves_give_zero():
    w = doubled(make_series(400, seed=1))
    for out in (mean_test(w, 400), variance_test(w, 400)):
        assert out.statistic == 0.0
        assert not out.reject
    j = joint_test(w, 400)
    assert not j.reject_any and not j.reject_mean and not j.reject_variance


def test_reject_matches_critical_value(null_series):
    for cfg in (TestConfig(), TestConfig(target="variance"), TestConfig(variance_assumption="common")):
        out = run_test(null_series, 300, cfg)
        assert out.reject == (out.statistic > out.critical_value)
        assert out.critical_value == pytest.approx(critical_value(out.m, gumbel_quantile(cfg.alpha)))


def test_clear_breaks_are_found():
    s = make_series(1000, seg=(5, 2), breaks=(500,), seed=2)
    assert mean_test(s, 500).reject
    assert variance_test(s, 500).reject
    assert joint_test(s, 500).reject_any


def test_variance_outcome_reports_nu():
    out = variance_test(make_series(600, seed=4), 300)
    assert out.nu_epsilon is not None and out.nu_epsilon.count > 0
    assert "nu_epsilon" in out.to_dict()


def test_split_must_be_inside(null_series):
    with pytest.raises(ValueError):
        mean_test(null_series, 0)
    with pytest.raises(ValueError):
        mean_test(null_series, len(null_series))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(0, 1000))
def test_mean_statistic_scale_equivariant(c, seed):
    s = make_series(400, seg=(5, 1), breaks=(200,), seed=seed)
    scaled = TimeSeriesSample(s.times, c * s.y, s.x)
    a, b = mean_test(s, 200), mean_test(scaled, 200)
    assert b.statistic == pytest.approx(a.statistic, rel=1e-6, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_statistic_permutation_invariant(seed):
    s = make_series(400, seg=(5, 2), breaks=(200,), seed=seed % 1000)
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(200), 200 + rng.permutation(200)])
    t = TimeSeriesSample.from_arrays(s.y[order], s.x[order])
    for test in (mean_test, variance_test):
        assert test(t, 200).statistic == pytest.approx(test(s, 200).statistic, rel=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.floats(0.001, 0.3), st.floats(0.001, 0.3))
def test_alpha_monotone(seed, a1, a2):
    lo, hi = sorted((a1, a2))
    s = make_series(400, seg=(5, 1), breaks=(220,), seed=seed)
    for target in ("mean", "variance", "joint"):
        r_lo = run_test(s, 200, TestConfig(alpha=lo, target=target)).reject
        r_hi = run_test(s, 200, TestConfig(alpha=hi, target=target)).reject
        assert r_hi or not r_lo


# ------------------------------------------------------------------- Holm


def _outcome(stat, m=20, kind="mean"):
    return TestOutcome(stat, m, critical_value(m, gumbel_quantile(0.05)), False, 0.0, kind)


def test_holm_zero_statistics():
    j = _holm(_outcome(0.0), _outcome(0.0, kind="variance"), 0.05)
    assert not (j.reject_any or j.reject_mean or j.reject_variance or j.reject_both_printed)


def test_holm_step_down():
    m = 20
    b_half = critical_value(m, gumbel_quantile(0.025))
    b_full = critical_value(m, gumbel_quantile(0.05))
    between = 0.5 * (b_half + b_full)
    # strong mean evidence, weaker variance evidence between the two levels
    j = _holm(_outcome(b_half + 1), _outcome(between, kind="variance"), 0.05)
    assert j.reject_any and j.reject_mean and j.reject_variance
    assert not j.reject_both_printed
    # the larger statistic alone between the levels: nothing rejected
    j = _holm(_outcome(between), _outcome(0.1, kind="variance"), 0.05)
    assert not j.reject_any
    # variance is the larger one
    j = _holm(_outcome(0.1), _outcome(b_half + 0.01, kind="variance"), 0.05)
    assert j.reject_variance and not j.reject_mean


@given(st.floats(0, 10), st.floats(0, 10))
def test_holm_consistency(t1, t2):
    j = _holm(_outcome(t1), _outcome(t2, kind="variance"), 0.05)
    assert j.reject_any == (j.reject_mean or j.reject_variance)
    if j.reject_both_printed:
        assert j.reject_mean and j.reject_variance


# ------------------------------------------------------------------ bands


def test_bands_identical_halves():
    w = doubled(make_series(400, seed=5))
    for band in (confidence_band_mean_diff(w, 400), confidence_band_variance_diff(w, 400)):
        np.testing.assert_array_equal(band.center, 0.0)
        assert np.all(band.lower <= 0) and np.all(band.upper >= 0)
        assert band.covers(0.0) and not band.excludes_zero()
        assert band.level == pytest.approx(0.95)


@pytest.mark.parametrize("seed", range(12))
def test_band_test_duality(seed):
    s = make_series(500, seg=(5, 2) if seed % 2 else (5, 5), breaks=(250,), seed=seed)
    for cfg in (TestConfig(), TestConfig(small_sample=False), TestConfig(variance_assumption="common")):
        assert confidence_band_mean_diff(s, 250, cfg).excludes_zero() == mean_test(s, 250, cfg).reject
        vcfg = cfg.replace(target="variance")
        assert confidence_band_variance_diff(s, 250, vcfg).excludes_zero() == variance_test(s, 250, vcfg).reject


def test_half_width_shrinks_with_n():
    def band(n, seed):
        return confidence_band_mean_diff(make_series(n, seed=seed), n // 2)

    for seed in range(3):
        small, large = band(1000, seed), band(4000, seed)
        lo = max(small.x.min(), large.x.min(), -1.0)
        hi = min(small.x.max(), large.x.max(), 1.0)
        at = np.linspace(lo, hi, 15)
        assert np.all(np.interp(at, large.x, large.half_width) < np.interp(at, small.x, small.half_width))
