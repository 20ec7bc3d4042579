import math

import numpy as np
import pytest
from scipy.stats import norm

from atypicality.codelength import InvalidArgumentError, subsequence_overhead
from atypicality.engine import (
    MEAN_CRITERION_OFFSET_BITS,
    MEAN_ONLY,
    MEAN_VARIANCE,
    THREADS_ENV,
    VARIANCE_ONLY,
    EngineConfig,
    GaussianTypical,
    LPCTypical,
    asymptotic_score,
    build_roster,
    fit_decay_slope,
    intrinsic_atypicality_bounds,
    mean_criterion_flags,
    mean_criterion_threshold,
    montecarlo_p_a,
    precode,
    scan,
    score_interval,
    standard_normal_bits,
    train_typical_lpc,
    typical_from_config,
    typical_from_dict,
)

LN2 = math.log(2)


def ar1(a, n, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    x = np.empty(n)
    prev = 0.0
    for i in range(n):
        prev = a * prev + e[i]
        x[i] = prev
    return x


def direct_gaussian_bits(x, mean, var):
    return -norm.logpdf(x, mean, math.sqrt(var)) / LN2


# --- typical coders and precoding ---------------------------------------------


def test_precode_scaled_gaussian():
    x = np.array([0.5, -2.0, 4.0])
    r, jac = precode(x, GaussianTypical(0.0, 4.0))
    assert np.allclose(r, x / 2)
    assert np.allclose(jac, 1.0)


def test_precode_standard_normal_is_identity():
    x = np.random.default_rng(0).standard_normal(10)
    r, jac = precode(x, GaussianTypical())
    assert np.array_equal(r, x)
    assert np.all(jac == 0)


def test_typical_bits_round_trip():
    x = np.random.default_rng(1).normal(1.5, 3.0, 200)
    t = GaussianTypical(1.5, 9.0)
    r, jac = precode(x, t)
    assert np.allclose(standard_normal_bits(r) + jac, direct_gaussian_bits(x, 1.5, 9.0), atol=1e-9)
    assert np.allclose(t.restore(r), x, atol=1e-12)


def test_lpc_round_trip_and_direct_bits():
    x = ar1(0.7, 3000, 2)
    t = train_typical_lpc(x, order=2, segment_length=1000)
    assert len(t.segments) == 3
    r, jac = precode(x, t)
    assert np.allclose(t.restore(r), x, atol=1e-9)
    # direct: Gaussian codelength of each prediction residual under its segment's model
    direct = np.empty(x.size)
    for seg in t.segments:
        for i in range(seg.start, seg.end):
            pred = sum(c * x[i - 1 - k] for k, c in enumerate(seg.coef) if i - 1 - k >= 0)
            direct[i] = direct_gaussian_bits(x[i], pred, seg.var)
    assert np.allclose(t.bits(x), direct, atol=1e-9)


def test_train_lpc_white_noise():
    x = np.random.default_rng(3).standard_normal(100_000)
    t = train_typical_lpc(x, order=10)
    assert np.all(np.abs(t.segments[0].coef) < 0.05)


def test_train_lpc_ar1():
    t = train_typical_lpc(ar1(0.9, 100_000, 4), order=10)
    assert 0.88 <= t.segments[0].coef[0] <= 0.92


def test_train_lpc_zero_input_falls_back():
    with pytest.warns(RuntimeWarning):
        t = train_typical_lpc(np.zeros(500), order=10)
    assert t.segments[0].var > 0
    assert np.all(np.array(t.segments[0].coef) == 0)


def test_train_lpc_requires_long_segments():
    with pytest.raises(InvalidArgumentError):
        train_typical_lpc(np.ones(1000), order=10, segment_length=100)


def test_train_lpc_short_tail_joins_previous_segment():
    t = train_typical_lpc(np.random.default_rng(5).standard_normal(2015), order=2, segment_length=1000)
    assert [(s.start, s.end) for s in t.segments] == [(0, 1000), (1000, 2015)]


def test_typical_serialization_round_trip():
    t = train_typical_lpc(ar1(0.5, 600, 6), order=3, segment_length=300)
    back = typical_from_dict(t.to_dict())
    assert isinstance(back, LPCTypical)
    x = ar1(0.5, 600, 7)
    assert np.array_equal(back.bits(x), t.bits(x))
    g = GaussianTypical(2.0, 3.0)
    assert typical_from_dict(g.to_dict()) == g


# --- asymptotic MDL detector --------------------------------------------------


def test_mean_threshold_example():
    assert mean_criterion_threshold(100, 8) == pytest.approx(math.sqrt(3 * math.log(100) + 21 * LN2))
    assert mean_criterion_threshold(100, 8) == pytest.approx(5.3264, abs=1e-4)


def test_all_zero_window_score():
    for l in (1, 7, 100):
        assert asymptotic_score(np.zeros(l), GaussianTypical(), MEAN_ONLY, 3.0) == pytest.approx(-1.5 * math.log2(l) - 3.0)


def test_mean_score_reduces_to_sum_statistic():
    # L_t - ML bits = (sum x)^2 / (2 l ln 2) for the mean-only model
    x = np.random.default_rng(8).normal(0.4, 1, 50)
    s = asymptotic_score(x, GaussianTypical(), MEAN_ONLY, 2.0)
    expected = x.sum() ** 2 / (2 * 50 * LN2) - 1.5 * math.log2(50) - 2.0
    assert s == pytest.approx(expected, abs=1e-9)


def test_whole_sequence_decision_matches_closed_form():
    rng = np.random.default_rng(9)
    agree = 0
    flagged = 0
    for _ in range(2000):
        l = int(rng.integers(2, 300))
        tau = float(rng.uniform(0, 20))
        x = rng.normal(float(rng.normal(0, 0.5)), 1.0, l)
        score = asymptotic_score(x, GaussianTypical(), MEAN_ONLY, tau, MEAN_CRITERION_OFFSET_BITS)
        closed = mean_criterion_flags(x, tau)
        agree += (score > 0) == closed
        flagged += closed
    assert agree == 2000
    assert 100 < flagged < 1900


def test_ml_fit_failure_scores_minus_infinity():
    assert asymptotic_score(np.ones(5), GaussianTypical(), VARIANCE_ONLY, 0.0) > -np.inf
    assert asymptotic_score(np.zeros(5), GaussianTypical(), VARIANCE_ONLY, 0.0) == -np.inf
    assert asymptotic_score(np.full(5, 2.0), GaussianTypical(), MEAN_VARIANCE, 0.0) == -np.inf


def test_asymptotic_score_rejects_empty_window():
    with pytest.raises(InvalidArgumentError):
        asymptotic_score(np.array([]), GaussianTypical(), MEAN_ONLY, 0.0)


def test_bounds_example():
    upper, lower, exact = intrinsic_atypicality_bounds(4, 0)
    assert upper == pytest.approx(2**-2.5 * 4**-1.5, rel=1e-12)
    assert upper == pytest.approx(0.022097, abs=1e-6)
    t = 3 * math.log(4) + 5 * LN2
    assert exact == pytest.approx(2 * norm.sf(math.sqrt(t)), rel=1e-12)


@pytest.mark.parametrize("l", [2, 10, 10**3, 10**6])
@pytest.mark.parametrize("tau", [0, 5, 20])
def test_bounds_ordering(l, tau):
    upper, lower, exact = intrinsic_atypicality_bounds(l, tau)
    assert lower < exact < upper


def test_decay_slope_ratio():
    ratio = math.log(intrinsic_atypicality_bounds(10**6, 0)[2] / intrinsic_atypicality_bounds(10**3, 0)[2]) / (
        -1.5 * math.log(10**3)
    )
    assert abs(ratio - 1) <= 0.15


def test_bounds_reject_short_windows():
    with pytest.raises(InvalidArgumentError):
        intrinsic_atypicality_bounds(1, 0)


def test_montecarlo_matches_closed_form_small():
    est = montecarlo_p_a([16, 64], 0.0, 200_000, seed=3)
    for e in est:
        exact = intrinsic_atypicality_bounds(e.l, 0)[2]
        se = math.sqrt(exact * (1 - exact) / e.trials)
        assert abs(e.p_hat - exact) <= 3 * se


def test_montecarlo_is_deterministic_and_validates():
    a = montecarlo_p_a([8], 0.0, 10_000, seed=11)
    b = montecarlo_p_a([8], 0.0, 10_000, seed=11, max_chunk_elems=1000)
    assert a == b
    with pytest.raises(InvalidArgumentError):
        montecarlo_p_a([8], 0.0, 9_999, seed=1)


def test_second_one_parameter_model_barely_changes_slope():
    ls = [8, 32, 128]
    s1 = fit_decay_slope(montecarlo_p_a(ls, 0.0, 100_000, seed=5))
    s2 = fit_decay_slope(montecarlo_p_a(ls, 0.0, 100_000, seed=5, models=(MEAN_ONLY, VARIANCE_ONLY)))
    assert abs(s2 - s1) < 0.2


# --- configuration ------------------------------------------------------------


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        EngineConfig(tau=-1)
    with pytest.raises(InvalidArgumentError):
        EngineConfig(tau=float("nan"))
    with pytest.raises(InvalidArgumentError):
        EngineConfig(tau=1, l_min=10, l_max=5)
    with pytest.raises(InvalidArgumentError):
        EngineConfig(tau=1, l_min=0)
    with pytest.raises(InvalidArgumentError):
        EngineConfig(tau=1, combine="max")
    with pytest.raises(InvalidArgumentError):
        EngineConfig.from_dict({"l_max": 10})
    with pytest.raises(InvalidArgumentError):
        EngineConfig.from_dict({"tau": 1, "bogus": 2})


def test_config_dict_round_trip():
    cfg = EngineConfig(tau=4, l_max=64, combine="min")
    assert EngineConfig.from_dict(cfg.to_dict()) == cfg


def test_roster_rejects_unknown_model():
    with pytest.raises(InvalidArgumentError):
        build_roster([{"model": "nope"}])


# --- scanning -----------------------------------------------------------------


def mean_burst_series(seed=12, n=10_000, at=5000, length=200, shift=4.0):
    x = np.random.default_rng(seed).standard_normal(n)
    x[at : at + length] += shift
    return x


def test_scan_single_mean_shift():
    x = mean_burst_series()
    dets = scan(x, GaussianTypical(), EngineConfig(tau=20, l_max=256))
    assert len(dets) == 1
    d = dets[0]
    cover = max(0, min(d.end, 5200) - max(d.start, 5000))
    assert cover >= 100
    assert d.score > 0
    assert d.model in build_roster(EngineConfig(tau=20).roster).ids


def test_scan_white_noise_few_flags():
    x = np.random.default_rng(13).standard_normal(10**6)
    dets = scan(x, GaussianTypical(), EngineConfig(tau=20, l_max=64))
    assert len(dets) <= 3


def test_scan_scores_recompute_exactly():
    x = mean_burst_series(seed=14, n=4000, at=1000, length=150, shift=3.0)
    x[3000:3100] *= 3
    for combine in ("mixture", "min"):
        cfg = EngineConfig(tau=10, l_max=256, combine=combine)
        dets = scan(x, GaussianTypical(), cfg)
        assert dets
        for d in dets:
            assert d.score == pytest.approx(score_interval(x, GaussianTypical(), cfg, d.start, d.end), abs=1e-6)
            assert d.length >= cfg.l_min


def test_scan_output_non_overlapping_and_sorted():
    x = mean_burst_series(seed=15, n=5000, at=500, length=100)
    x[2000:2100] -= 4
    x[4000:4200] *= 4
    dets = scan(x, GaussianTypical(), EngineConfig(tau=5, l_max=300))
    assert len(dets) >= 3
    for a, b in zip(dets, dets[1:]):
        assert a.end <= b.start


def test_whole_sequence_scan():
    x = mean_burst_series(seed=16, n=200, at=0, length=200, shift=1.0)
    cfg = EngineConfig(tau=5, l_min=200, l_max=200)
    dets = scan(x, GaussianTypical(), cfg)
    expected = score_interval(x, GaussianTypical(), cfg, 0, 200)
    assert expected > 0
    assert len(dets) == 1 and (dets[0].start, dets[0].end) == (0, 200)
    assert dets[0].score == pytest.approx(expected, abs=1e-6)
    assert scan(np.random.default_rng(17).standard_normal(200), GaussianTypical(), cfg) == []


def test_scan_deterministic_across_thread_counts(monkeypatch):
    x = mean_burst_series(seed=18, n=3000, at=1200, length=200)
    cfg = EngineConfig(tau=10, l_max=128, chunk_starts=64)
    monkeypatch.setenv(THREADS_ENV, "1")
    one = scan(x, GaussianTypical(), cfg)
    monkeypatch.setenv(THREADS_ENV, "4")
    four = scan(x, GaussianTypical(), cfg)
    assert one == four
    assert [d.score for d in one] == [d.score for d in four]


def test_scan_stride_and_short_input():
    x = mean_burst_series(seed=19, n=2000, at=800, length=200)
    dets = scan(x, GaussianTypical(), EngineConfig(tau=10, l_max=256, stride=4))
    assert len(dets) == 1 and dets[0].start % 4 == 0
    with pytest.raises(InvalidArgumentError):
        scan(np.zeros(3), GaussianTypical(), EngineConfig(tau=1))


def test_scan_with_trained_lpc_typical():
    x = ar1(0.9, 20_000, 20)
    x[12_000:12_200] += 8
    cfg = EngineConfig(tau=20, l_max=256, typical={"kind": "lpc", "order": 4})
    t = typical_from_config(x, cfg)
    assert isinstance(t, LPCTypical)
    dets = scan(x, t, cfg)
    assert any(d.start < 12_200 and d.end > 12_000 for d in dets)


def test_score_uses_overhead():
    x = mean_burst_series(seed=21, n=100, at=0, length=100, shift=2.0)
    cfg = EngineConfig(tau=0, l_min=100, l_max=100)
    s0 = score_interval(x, GaussianTypical(), cfg, 0, 100)
    cfg5 = EngineConfig(tau=5, l_min=100, l_max=100)
    assert score_interval(x, GaussianTypical(), cfg5, 0, 100) == pytest.approx(s0 - 5)
    assert subsequence_overhead(100, 5) - subsequence_overhead(100, 0) == pytest.approx(5)
