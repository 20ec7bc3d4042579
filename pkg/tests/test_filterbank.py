import math

import numpy as np
import pytest

from atypicality.codelength import InvalidArgumentError
from atypicality.filterbank import (
    DAUB4,
    FILTERS,
    HAAR,
    _mix_half,
    analyze,
    can_split,
    stationary_gain_estimate,
    synthesize,
    tree_bits,
    weighted_node_bits,
)
from atypicality.scalar import iid_meanvar_bits


def ar1(a, n, rng):
    e = rng.standard_normal(n)
    x = np.empty(n)
    prev = rng.standard_normal() / math.sqrt(1 - a * a)
    for i in range(n):
        prev = a * prev + e[i]
        x[i] = prev
    return x


@pytest.mark.parametrize("pair", FILTERS.values(), ids=FILTERS.keys())
def test_orthonormality(pair):
    h, g = pair.h, pair.g
    t = pair.taps
    assert np.sum(h * h) == pytest.approx(1, abs=1e-10)
    assert np.sum(g * g) == pytest.approx(1, abs=1e-10)
    for m in range(-(t // 2), t // 2 + 1):
        hh = sum(h[k] * h[k - 2 * m] for k in range(t) if 0 <= k - 2 * m < t)
        hg = sum(h[k] * g[k - 2 * m] for k in range(t) if 0 <= k - 2 * m < t)
        assert hh == pytest.approx(1.0 if m == 0 else 0.0, abs=1e-10)
        assert hg == pytest.approx(0.0, abs=1e-10)


def test_haar_on_constant_block():
    low, high, transient = analyze(np.ones(4), HAAR)
    assert np.allclose(low, [math.sqrt(2), math.sqrt(2)])
    assert np.allclose(high, 0)
    assert transient.size == 0


@pytest.mark.parametrize("pair", FILTERS.values(), ids=FILTERS.keys())
@pytest.mark.parametrize("n", [64, 65, 16, 7])
def test_energy_and_reconstruction(pair, n):
    if not can_split(n, pair):
        pytest.skip("block too short for this filter")
    x = np.random.default_rng(n).standard_normal(n)
    low, high, transient = analyze(x, pair)
    assert np.sum(low**2) + np.sum(high**2) + np.sum(transient**2) == pytest.approx(np.sum(x**2), rel=1e-12)
    assert np.max(np.abs(synthesize(low, high, transient, pair, n) - x)) <= 1e-9


def test_steady_state_outputs_match_plain_convolution():
    # outputs that do not wrap equal ordinary convolve-and-downsample
    x = np.random.default_rng(1).standard_normal(32)
    low, high, _ = analyze(x, DAUB4)
    full_low = np.convolve(x, DAUB4.h)[1::2][: 16]
    full_high = np.convolve(x, DAUB4.g)[1::2][: 16]
    w = DAUB4.wrap
    assert np.allclose(low, full_low[w:], atol=1e-12)
    assert np.allclose(high, full_high[w:], atol=1e-12)


def test_short_block_refuses_to_split():
    with pytest.raises(InvalidArgumentError):
        analyze(np.ones(3), DAUB4)
    x = np.array([0.3, -1.0, 2.0])
    assert weighted_node_bits(x, 0, 3, DAUB4) == pytest.approx(iid_meanvar_bits(x) + 1.0)


def test_half_weight_mixture():
    assert _mix_half(10.0, 8.0) == pytest.approx(-math.log2(0.5 * (2**-10 + 2**-8)), abs=1e-12)
    assert _mix_half(10.0, 8.0) == pytest.approx(8.6781, abs=1e-4)


def test_weighted_never_worse_than_best_plus_one():
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = rng.standard_normal(int(rng.integers(8, 200))) * rng.uniform(0.1, 5)
        here = iid_meanvar_bits(x)
        assert tree_bits(x, 3) <= here + 1 + 1e-9
        assert tree_bits(x, 0) == pytest.approx(here)


def test_stationary_gain_examples():
    assert stationary_gain_estimate(1, 1, 1024) == pytest.approx(-0.5 * math.log2(1024))
    assert stationary_gain_estimate(4, 1, 1024) == pytest.approx(512 * math.log2(1.25) - 5, abs=1e-9)
    assert stationary_gain_estimate(4, 1, 1024) == pytest.approx(159.9, abs=0.1)
    assert stationary_gain_estimate(4, 1, 10**6) > stationary_gain_estimate(4, 1, 10**4) > 0


def test_ar1_gain_and_white_penalty():
    wins = 0
    penalties = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        x = ar1(0.9, 4096, rng)
        wins += tree_bits(x, 3) < iid_meanvar_bits(x)
        w = rng.standard_normal(4096)
        penalties.append(tree_bits(w, 3) - iid_meanvar_bits(w))
    assert wins >= 95
    assert np.mean(penalties) <= 3 + 1
