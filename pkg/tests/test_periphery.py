import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from neuracoustic.periphery import (
    DEFAULT_FIBER_PARAMS, NO_CND, SLOPING_LOSS, Audiogram, CNDProfile, FiberParams, FiberType,
    PeripheryConfig, band_drive, cf_grid, draw_fiber_bank, erb, fiber_bank_rates, fiber_rate,
    ohc_gain_reduction, poisson_inverse_cdf, simulate_fiber_bank, spike_psth, spike_uniforms,
)
from neuracoustic.stimulus import Waveform, scale_to_spl


def cf_tone(cf, level=60.0, fs=100_000.0, dur=0.05):
    t = np.arange(int(dur * fs)) / fs
    return scale_to_spl(Waveform(np.sin(2 * np.pi * cf * t), fs), level)


def test_cf_grid_examples():
    assert np.allclose(cf_grid(PeripheryConfig(n_cf=2)), [125, 8000])
    assert np.allclose(cf_grid(PeripheryConfig(n_cf=3)), [125, 1000, 8000], rtol=1e-12)
    g = cf_grid(PeripheryConfig(n_cf=5, cf_min_hz=100, cf_max_hz=1600))
    assert np.allclose(g[1:] / g[:-1], 2.0, atol=1e-12)


def test_sloping_loss_points():
    assert SLOPING_LOSS.threshold_at(4000.0) == pytest.approx(45.0)
    assert SLOPING_LOSS.threshold_at(250.0) == pytest.approx(0.0)
    # linear in log-frequency between 23 and 45 dB
    assert float(ohc_gain_reduction(SLOPING_LOSS, 2828.4)) == pytest.approx(34.0, abs=1e-3)
    assert float(ohc_gain_reduction(SLOPING_LOSS, np.sqrt(2000.0 * 4000.0))) == pytest.approx(34.0, abs=1e-12)


def test_ohc_cap():
    assert float(ohc_gain_reduction(Audiogram.flat(80), 1000.0)) == 55.0
    assert float(ohc_gain_reduction(Audiogram.flat(80), 1000.0, max_ohc_db=40)) == 40.0


def test_audiogram_validation():
    with pytest.raises(ValueError):
        Audiogram(((500.0, 10.0), (8000.0, 10.0)))
    with pytest.raises(ValueError):
        Audiogram.flat(130)
    with pytest.raises(ValueError):
        Audiogram.flat(-5)
    a = Audiogram.from_thresholds([0, 0, 10, 20, 23, 45, 75])
    assert a == SLOPING_LOSS
    assert Audiogram(tuple(map(tuple, a.to_list()))) == a


@settings(max_examples=40, deadline=None)
@given(st.floats(125, 8000))
def test_audiogram_interpolation_bounded(f):
    v = SLOPING_LOSS.threshold_at(f)
    assert 0.0 <= v <= 75.0


def test_erb_value():
    assert float(erb(1000.0)) == pytest.approx(24.7 * 5.37)


def test_drive_silence():
    d = band_drive(Waveform(np.zeros(1000), 100_000.0), 1000.0, Audiogram.flat(0))
    assert np.all(d == 0.0)


def test_drive_tone_periodic():
    fs, cf = 100_000.0, 500.0
    d = band_drive(cf_tone(cf, fs=fs, dur=0.1), cf, Audiogram.flat(0))
    assert np.all(d >= 0)
    tail = d[d.size // 2:]
    spec = np.abs(np.fft.rfft(tail - tail.mean()))
    f = np.fft.rfftfreq(tail.size, 1 / fs)
    assert abs(f[np.argmax(spec)] - cf) < 20


def test_drive_loss_ratio():
    # gain reduction precedes a homogeneous rectifier, so a tone at CF scales exactly
    cf = 1000.0
    x = cf_tone(cf, dur=0.1)
    d0 = band_drive(x, cf, Audiogram.flat(0))
    d45 = band_drive(x, cf, Audiogram.flat(45))
    tail = slice(d0.size // 2, None)
    ratio = np.sqrt(np.mean(d45[tail] ** 2) / np.mean(d0[tail] ** 2))
    assert ratio == pytest.approx(10 ** (-45 / 20), rel=0.02)


def test_fiber_rate_limits():
    p = DEFAULT_FIBER_PARAMS[FiberType.MS]
    assert np.all(fiber_rate(np.zeros(5), p, 40.0) == p.spont)
    assert fiber_rate([1e9], p, 40.0)[0] == pytest.approx(p.saturation, rel=0.01)
    at_thr = fiber_rate([10 ** (40.0 / 20)], p, 40.0)[0]
    assert at_thr == pytest.approx((p.spont + p.saturation) / 2, abs=1e-9)
    with pytest.raises(ValueError):
        fiber_rate([-1.0], p, 40.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e6), min_size=2, max_size=20))
def test_fiber_rate_monotone_bounded(drive):
    p = DEFAULT_FIBER_PARAMS[FiberType.HS]
    x = np.sort(drive)
    r = fiber_rate(x, p, 30.0)
    assert np.all(np.diff(r) >= -1e-12)
    assert np.all((r >= p.spont) & (r <= p.saturation))


def test_fiber_param_defaults_ordered():
    ls, ms, hs = (DEFAULT_FIBER_PARAMS[f] for f in FiberType)
    assert ls.threshold_db > ms.threshold_db > hs.threshold_db
    assert ls.spont < ms.spont < hs.spont


def test_config_validation():
    with pytest.raises(ValueError):
        PeripheryConfig(n_cf=1)
    with pytest.raises(ValueError):
        PeripheryConfig(cf_max_hz=60_000.0)
    bad = dict(DEFAULT_FIBER_PARAMS)
    bad[FiberType.LS] = FiberParams(0.1, -5, 150, 40)
    with pytest.raises(ValueError):
        PeripheryConfig(fibers=bad)
    c = PeripheryConfig(n_cf=12)
    assert PeripheryConfig.from_dict(c.to_dict()) == c


def test_cnd_profile():
    assert NO_CND.counts == (5, 5, 12)
    with pytest.raises(ValueError):
        CNDProfile(-1, 5, 12)
    assert CNDProfile(0, 0, 0).empty


# ---------------------------------------------------------------- poisson

@settings(max_examples=60, deadline=None)
@given(st.floats(0, 500), st.floats(1e-9, 1 - 1e-9))
def test_inverse_cdf_matches_scipy(lam, u):
    k = int(poisson_inverse_cdf(np.array([u]), np.array([lam]))[0])
    assert k == pytest.approx(stats.poisson.ppf(u, lam), abs=1 if lam > 60 else 0)


def test_inverse_cdf_distribution():
    rng = np.random.default_rng(7)
    for lam in (0.3, 5.0, 100.0):
        k = poisson_inverse_cdf(rng.random(20000), np.full(20000, lam))
        assert k.mean() == pytest.approx(lam, rel=0.05, abs=0.02)
        assert k.var() == pytest.approx(lam, rel=0.1, abs=0.03)


def test_spike_psth_zero_rate():
    p = spike_psth(np.zeros(1000), 1e-3, 10, seed=1)
    assert p.counts.sum() == 0 and p.counts.size == 10


def test_spike_psth_poisson_law():
    # 100 sp/s, 10 ms bins, 1000 reps -> mean 1000 spikes/bin; scale to the
    # stated "1.0 per bin per rep" and Fano factor of the raw counts
    rate = np.full(100_000, 100.0)
    p = spike_psth(rate, 10e-3, 1000, seed=3)
    per_rep = p.counts / 1000
    assert per_rep.mean() == pytest.approx(1.0, abs=0.1)
    fano = p.counts.var(ddof=1) / p.counts.mean()
    assert fano == pytest.approx(1.0, abs=0.15 * 3)  # 100 bins: sampling sd of Fano ~ 0.14


def test_spike_psth_fano_many_bins():
    rate = np.full(1_000_000, 100.0)
    p = spike_psth(rate, 1e-3, 10, seed=5)
    assert p.counts.mean() == pytest.approx(1.0, abs=0.1)
    assert p.counts.var(ddof=1) / p.counts.mean() == pytest.approx(1.0, abs=0.15)


def test_spike_psth_determinism():
    rate = np.full(10_000, 50.0)
    a = spike_psth(rate, 1e-4, 5, seed=11)
    b = spike_psth(rate, 1e-4, 5, seed=11)
    assert np.array_equal(a.counts, b.counts)
    with pytest.raises(ValueError):
        spike_psth(rate, 1e-6, 5, seed=0)


# ---------------------------------------------------------------- bank

def test_bank_silence_means(small_config):
    cfg = small_config.with_(n_reps=50)
    silence = Waveform(np.zeros(8000), 20_000.0)
    bank = simulate_fiber_bank(silence, Audiogram.flat(0), NO_CND, cfg)
    dur = 0.4
    for ft in FiberType:
        total = sum(p.counts.sum() for p in bank[ft])
        want = NO_CND.count(ft) * DEFAULT_FIBER_PARAMS[ft].spont * dur * cfg.n_reps * cfg.n_cf
        assert abs(total - want) <= 4 * np.sqrt(want)  # Poisson 4-sigma band


def test_bank_absent_populations(small_config):
    x = cf_tone(1000.0, 70.0, fs=20_000.0, dur=0.1)
    full = simulate_fiber_bank(x, Audiogram.flat(0), NO_CND, small_config)
    hs_only = simulate_fiber_bank(x, Audiogram.flat(0), CNDProfile(0, 0, 12), small_config)
    for ft in (FiberType.LS, FiberType.MS):
        assert all(p.absent and p.counts.sum() == 0 for p in hs_only[ft])
    for a, b in zip(full[FiberType.HS], hs_only[FiberType.HS]):
        assert np.array_equal(a.counts, b.counts) and not b.absent
    with pytest.raises(ValueError):
        simulate_fiber_bank(x, Audiogram.flat(0), CNDProfile(0, 0, 0), small_config)


def test_bank_reps_double_expected(small_config):
    x = cf_tone(1000.0, 70.0, fs=20_000.0, dur=0.05)
    r1 = fiber_bank_rates(x, Audiogram.flat(0), small_config)
    u = spike_uniforms(small_config, *r1.means.shape[1:])
    c2 = small_config.with_(n_reps=2 * small_config.n_reps)
    r2 = fiber_bank_rates(x, Audiogram.flat(0), c2)
    assert np.allclose(r1.means, r2.means)
    a = draw_fiber_bank(r1, NO_CND, u)
    b = draw_fiber_bank(r2, NO_CND, u)
    sa = sum(p.counts.sum() for ps in a.values() for p in ps)
    sb = sum(p.counts.sum() for ps in b.values() for p in ps)
    expect = r1.means.sum(axis=(1, 2)) @ np.array(NO_CND.counts) * small_config.n_reps
    assert sa == pytest.approx(expect, rel=0.05)
    assert sb == pytest.approx(2 * expect, rel=0.05)


def test_bank_seed_streams(small_config):
    x = cf_tone(2000.0, 65.0, fs=20_000.0, dur=0.05)
    a = simulate_fiber_bank(x, Audiogram.flat(0), NO_CND, small_config)
    b = simulate_fiber_bank(x, Audiogram.flat(0), NO_CND, small_config)
    c = simulate_fiber_bank(x, Audiogram.flat(0), NO_CND, small_config.with_(seed=1))
    assert all(np.array_equal(p.counts, q.counts) for p, q in zip(a[FiberType.HS], b[FiberType.HS]))
    assert any(not np.array_equal(p.counts, q.counts) for p, q in zip(a[FiberType.HS], c[FiberType.HS]))
    assert [p.cf_hz for p in a[FiberType.LS]] == list(cf_grid(small_config))
