import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nwbreak import TimeSeriesSample
from nwbreak.breaktests import TestConfig
from nwbreak.detect import (
    BreakSet,
    DetectConfig,
    NoAdmissibleCandidateError,
    _enforce_gap,
    _split_test,
    argmax_single_break,
    cp_disparity,
    cpfind,
    time_partition,
)
from nwbreak.estimators import SegmentTooSmallError
from nwbreak.kernels import InvalidConfigurationError

from conftest import doubled, make_series


def test_config_defaults_and_validation():
    cfg = DetectConfig()
    assert cfg.min_gap == cfg.l_min == 100
    assert cfg.replace(l_min=200).min_gap == 200
    assert cfg.replace(min_gap=50).min_gap == 50
    with pytest.raises(InvalidConfigurationError):
        DetectConfig(l_min=50)
    with pytest.raises(InvalidConfigurationError):
        DetectConfig(alpha=0.0)
    with pytest.raises(InvalidConfigurationError):
        DetectConfig(target="median")
    assert cfg.to_dict()["l_min"] == 100


# ------------------------------------------------------------ disparity


def test_disparity_identical_halves():
    w = doubled(make_series(300, seed=1))
    assert cp_disparity(w, 299) == (0.0, 0.0)


def test_disparity_level_shift():
    base = make_series(1000, seed=2)
    c = 0.8
    w = TimeSeriesSample.from_arrays(np.concatenate([base.y, base.y + c]), np.concatenate([base.x, base.x]))
    mu, var = cp_disparity(w, 999)
    assert mu >= c / 2
    assert mu == pytest.approx(c, rel=1e-9)
    assert var == pytest.approx(0.0, abs=1e-9)


def test_disparity_needs_both_sides():
    s = make_series(200, seed=3)
    with pytest.raises(SegmentTooSmallError):
        cp_disparity(s, 10)
    with pytest.raises(SegmentTooSmallError):
        cp_disparity(s, 180)


# --------------------------------------------------------------- cpfind


def test_short_series_gives_empty_set():
    out = cpfind(make_series(99, seed=4))
    assert out == BreakSet()
    assert len(out) == 0


def test_two_clear_breaks():
    s = make_series(1200, seg=(5, 2, 3), breaks=(400, 800), seed=5)
    out = cpfind(s)
    # candidates are window midpoints, so resolution is about l_min
    for true in (399, 799):
        assert min(abs(b - true) for b in out.breaks) <= 100
    assert 2 <= len(out.breaks) <= 3
    assert all(out.confirmed) and len(out.scores) == len(out.breaks)
    assert set(out.breaks) <= set(out.candidates)


def test_deterministic_and_worker_independent():
    s = make_series(1000, seg=(5, 2, 3), breaks=(300, 650), seed=6)
    a = cpfind(s)
    assert cpfind(s) == a
    assert cpfind(s, workers=3) == a


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([100, 150, 250]))
def test_breakset_invariants(seed, l_min):
    s = make_series(900, seg=(1, 3, 2), breaks=(300, 600), seed=seed)
    out = cpfind(s, DetectConfig(l_min=l_min))
    b = np.array(out.breaks)
    assert np.all(np.diff(b) >= l_min)
    assert np.all((b >= 0) & (b < len(s) - 1))
    assert len(out.breaks) == len(out.confirmed) == len(out.scores)


def test_null_series_rarely_flagged():
    counts = [len(cpfind(make_series(1000, seed=100 + r))) for r in range(12)]
    assert np.mean(counts) <= 0.5


def test_failed_estimation_is_no_rejection():
    s = make_series(100, seed=7)
    # 20 observations on the left: too few to estimate
    assert _split_test(s, -1, 99, 19, TestConfig()) == (False, 0.0)


def test_gap_merge_keeps_higher_score():
    assert _enforce_gap([100, 150, 400], [3.0, 5.0, 4.0], 100) == ([150, 400], [5.0, 4.0])
    assert _enforce_gap([100, 150], [6.0, 5.0], 100) == ([100], [6.0])
    assert _enforce_gap([], [], 100) == ([], [])


# ------------------------------------------------------------- argmax


def test_partition():
    np.testing.assert_array_equal(time_partition(2000, 2000 ** -0.2), [0, 874, 1749])
    np.testing.assert_array_equal(time_partition(1000, 0.25), [0, 500])
    np.testing.assert_array_equal(time_partition(100, 0.25, resolution=0.1), np.arange(0, 100, 10))
    with pytest.raises(InvalidConfigurationError):
        time_partition(100, 0.25, resolution=0.0)


def test_argmax_no_admissible_candidate():
    with pytest.raises(NoAdmissibleCandidateError):
        argmax_single_break(make_series(40, seed=8))


def test_argmax_fine_resolution_locates_break():
    s = make_series(2000, seg=(1, 2), breaks=(1000,), seed=9)
    t, score = argmax_single_break(s, resolution=0.02)
    assert abs(t - 999) <= 0.05 * 2000
    assert score > 0


def test_argmax_time_origin_relabel():
    s = make_series(1000, seg=(1, 2), breaks=(480,), seed=10)
    shifted = TimeSeriesSample(s.times + 5000, s.y, s.x)
    t1, v1 = argmax_single_break(s, resolution=0.05)
    t2, v2 = argmax_single_break(shifted, resolution=0.05)
    assert shifted.times[t2] - s.times[t1] == 5000
    assert v1 == v2


def test_argmax_variance_target():
    rng = np.random.default_rng(11)
    x = rng.standard_normal(1000)
    eps = rng.standard_normal(1000)
    eps[500:] *= 3.0
    s = TimeSeriesSample.from_arrays(np.sin(x) + eps, x)
    cfg = DetectConfig(target="variance")
    t, score = argmax_single_break(s, cfg, resolution=0.2)
    cands = [c for c in time_partition(1000, 0.25, 0.2) if c >= 30]
    scores = [cp_disparity(s, int(c), cfg)[1] for c in cands]
    assert t == cands[int(np.argmax(scores))]
    assert score == max(scores)
