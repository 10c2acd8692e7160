import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from neuracoustic.similarity import (
    SimilarityConfig, WindowKernel, gaussian_window, local_stats, nsi_map, nsim,
    overall_nsim, similarity_constants, ssi, windowed_stats,
)

import oracles

# 1/(1+4e^-2+4e^-4) and friends, evaluated by the brute-force oracle
CENTER = oracles.gauss_weight(0, 0)
EDGE = oracles.gauss_weight(0, 1)
CORNER = oracles.gauss_weight(1, 1)


def test_frozen_kernel_weights():
    assert CENTER == pytest.approx(0.6193470305571773, abs=1e-15)
    w = gaussian_window().weights
    assert w[1, 1] == pytest.approx(0.6193470305571773, abs=1e-12)
    assert w[0, 1] == pytest.approx(0.0838195058022106, abs=1e-12)
    assert w[0, 0] == pytest.approx(0.011343736558495071, abs=1e-12)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    # quoted 5-decimal edge and corner figures
    assert abs(w[0, 1] - 0.08382) < 1e-5 and abs(w[0, 0] - 0.01134) < 1e-5


def test_kernel_validation():
    with pytest.raises(ValueError):
        WindowKernel(np.ones((2, 2)) / 4)
    with pytest.raises(ValueError):
        WindowKernel(np.ones((3, 3)))
    bad = np.full((3, 3), 1 / 9)
    bad[0, 0] += 0.01
    bad[2, 2] -= 0.01
    with pytest.raises(ValueError):
        WindowKernel(bad)


def test_constants_rules():
    c1, c2, c3 = similarity_constants(2.0, "paper")
    assert (c1, c2, c3) == pytest.approx((0.02, 0.0036, 0.0018))
    c1, c2, c3 = similarity_constants(2.0, "standard")
    assert (c1, c2, c3) == pytest.approx((0.0004, 0.0036, 0.0018))


def test_constant_windows_value():
    # r = 1, d = 0.5 everywhere, L = 1: luminance (1 + .01)/(1.25 + .01), structure 1
    r = np.ones((4, 5))
    d = np.full((4, 5), 0.5)
    res = nsim(r, d)
    assert res.nsim == pytest.approx(1.01 / 1.26, abs=1e-14)
    assert res.nsi_map.shape == (2, 3)
    assert res.n_windows == 6
    assert res.l_used == 1.0


def test_local_stats_match_oracle(rng):
    r, d = rng.random((5, 6)), rng.random((5, 6))
    got = local_stats(r, d, gaussian_window(), 2, 3)
    want = oracles.window_moments(r.tolist(), d.tolist(), 2, 3)
    assert np.allclose(got, want, atol=1e-14)


def test_windowed_stats_shape(rng):
    stats = windowed_stats(rng.random((6, 9)), rng.random((6, 9)), gaussian_window())
    assert all(np.shape(s) == (4, 7) for s in stats)


@pytest.mark.parametrize("shape", [(3, 3), (5, 8), (12, 7)])
def test_ssi_matches_oracle(shape, rng):
    r, d = rng.random(shape) * 3, rng.random(shape) * 3
    m, mean = ssi(r, d, SimilarityConfig(constants="standard"))
    want = np.array(oracles.ssim_map(r.tolist(), d.tolist(), r.max()))
    assert np.max(np.abs(m - want)) <= 1e-12
    assert mean == pytest.approx(want.mean(), abs=1e-12)


@pytest.mark.parametrize("rule", ["paper", "standard"])
def test_nsi_matches_oracle(rule, rng):
    r, d = rng.random((7, 9)), rng.random((7, 9))
    got = nsi_map(r, d, SimilarityConfig(constants=rule))
    want = np.array(oracles.nsi_map(r.tolist(), d.tolist(), r.max(), rule))
    assert np.max(np.abs(got - want)) <= 1e-12


def test_l_modes(rng):
    r, d = rng.random((5, 5)), rng.random((5, 5)) * 4
    assert nsim(r, d).l_used == r.max()
    assert nsim(r, d, SimilarityConfig(l_mode="pair_max")).l_used == d.max()
    assert nsim(r, d, SimilarityConfig(l_mode=7.5)).l_used == 7.5
    with pytest.raises(ValueError):
        SimilarityConfig(l_mode="median")
    with pytest.raises(ValueError):
        SimilarityConfig(l_mode=0.0)


def test_errors():
    with pytest.raises(ValueError, match="3x3"):
        nsim(np.ones((2, 5)), np.ones((2, 5)))
    with pytest.raises(ValueError, match="shape"):
        nsim(np.ones((4, 5)), np.ones((5, 4)))
    with pytest.raises(ValueError):
        nsim(np.zeros((4, 4)), np.ones((4, 4)))
    with pytest.raises(ValueError):
        nsim(np.full((4, 4), np.nan), np.ones((4, 4)))
    with pytest.raises(ValueError):
        SimilarityConfig(constants="weird")


def test_underflowing_range_rejected():
    r = np.full((3, 3), 5.6e-269)
    with pytest.raises(ValueError, match="too small"):
        nsim(r, np.zeros((3, 3)))
    with pytest.raises(ValueError, match="too small"):
        similarity_constants(1e-200, "standard")


def test_ssi_exponents_zero_is_one(rng):
    r, d = rng.random((5, 5)), rng.random((5, 5))
    m, mean = ssi(r, d, SimilarityConfig(alpha=0, beta=0, gamma=0))
    assert np.allclose(m, 1.0) and mean == pytest.approx(1.0)


def test_overall_nsim():
    assert overall_nsim(0.9, 0.6, 0.3) == pytest.approx(0.6, abs=1e-15)


def test_neurogram_objects_accepted(rng):
    from neuracoustic.neurogram import Neurogram
    v = rng.random((4, 6)) + 0.1
    n = Neurogram(v, np.arange(1, 5) * 100.0, 1e-4, "FT", "SUM")
    assert nsim(n, n).nsim == pytest.approx(1.0, abs=1e-12)


# spike-count scale values: exact zeros or at least 1e-3
values = st.one_of(st.just(0.0), st.floats(1e-3, 100, allow_nan=False))

mats = st.tuples(st.integers(3, 8), st.integers(3, 10)).flatmap(
    lambda s: st.tuples(
        arrays(np.float64, s, elements=values),
        arrays(np.float64, s, elements=values),
    )
)


@settings(max_examples=60, deadline=None)
@given(mats)
def test_identity_and_bounds(pair):
    r, d = pair
    if r.max() <= 0:
        r = r + 1.0
    assert nsim(r, r).nsim == pytest.approx(1.0, abs=1e-12)
    m = nsi_map(r, d)
    assert np.all(np.isfinite(m))
    # luminance <= 1 and structure in [-1, 1] up to the constants
    assert np.all(np.abs(m) <= 1 + 1e-9)


@settings(max_examples=40, deadline=None)
@given(mats, st.floats(0.1, 50))
def test_fixed_l_scale_invariance(pair, k):
    # scaling both inputs and a fixed L together leaves NSI unchanged under standard constants
    r, d = pair
    a = nsi_map(r, d, SimilarityConfig(constants="standard", l_mode=10.0))
    b = nsi_map(r * k, d * k, SimilarityConfig(constants="standard", l_mode=10.0 * k))
    assert np.allclose(a, b, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(mats)
def test_symmetry_with_fixed_l(pair):
    r, d = pair
    cfg = SimilarityConfig(l_mode=100.0)
    assert np.allclose(nsi_map(r, d, cfg), nsi_map(d, r, cfg), atol=1e-12)


def test_mean_uses_all_windows(rng):
    r, d = rng.random((6, 9)), rng.random((6, 9))
    res = nsim(r, d)
    assert res.nsim == pytest.approx(math.fsum(res.nsi_map.ravel()) / res.n_windows, abs=1e-15)
