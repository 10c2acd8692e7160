"""Simplified phenomenological auditory periphery.

Each characteristic frequency (CF) channel is a chain of

    gammatone filter (broadened and attenuated by outer-hair-cell loss)
    -> half-wave rectification -> 2nd-order low-pass (phase-locking roll-off)
    -> static sigmoidal rate-level function per fiber type
    -> inhomogeneous Poisson spike counts.

This is not a physiological auditory-nerve model: there is no adaptation,
refractoriness or synaptic noise. Externally computed neurograms can be
imported through :mod:`neuracoustic.neurogram` instead.

Spike counts are drawn by inverse-CDF sampling from one uniform stream per
``(master seed, CF index, fiber type)``. Because the summed activity of
``count`` fibers over ``n_reps`` repetitions is itself Poisson with mean
``count * n_reps * integral(rate)``, one draw per bin gives the summed PSTH
directly. Sharing the uniforms between a reference and a degraded run makes
their Poisson noise common, so differences reflect rate differences only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal, special

from .stimulus import P_REF, Waveform, resample

__all__ = [
    "FiberType",
    "FiberParams",
    "DEFAULT_FIBER_PARAMS",
    "Audiogram",
    "CNDProfile",
    "NO_CND",
    "PeripheryConfig",
    "PSTH",
    "BankRates",
    "cf_grid",
    "erb",
    "ohc_gain_reduction",
    "band_drive",
    "fiber_rate",
    "task_seed",
    "poisson_inverse_cdf",
    "spike_psth",
    "fiber_bank_rates",
    "spike_uniforms",
    "draw_fiber_bank",
    "simulate_fiber_bank",
]

AUDIOMETRIC_FREQS = (125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0)


class FiberType(str, enum.Enum):
    LS = "LS"
    MS = "MS"
    HS = "HS"

    @property
    def index(self) -> int:
        return ("LS", "MS", "HS").index(self.value)


@dataclass(frozen=True)
class FiberParams:
    """Rate-level parameters of one spontaneous-rate class.

    ``threshold_db`` is the sigmoid midpoint in dB relative to the HS
    midpoint; ``dynamic_range_db`` spans the 12 %-88 % part of the sigmoid.
    """

    spont: float
    threshold_db: float
    saturation: float
    dynamic_range_db: float

    def __post_init__(self):
        if not 0 <= self.spont < self.saturation:
            raise ValueError("need 0 <= spont < saturation")
        if not self.dynamic_range_db > 0:
            raise ValueError("dynamic range must be positive")


DEFAULT_FIBER_PARAMS = {
    FiberType.LS: FiberParams(spont=0.1, threshold_db=28.0, saturation=150.0, dynamic_range_db=40.0),
    FiberType.MS: FiberParams(spont=4.0, threshold_db=12.0, saturation=200.0, dynamic_range_db=30.0),
    FiberType.HS: FiberParams(spont=70.0, threshold_db=0.0, saturation=250.0, dynamic_range_db=20.0),
}


@dataclass(frozen=True)
class Audiogram:
    """Pure-tone thresholds in dB HL at increasing frequencies."""

    points: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(f), float(t)) for f, t in self.points)
        if len(pts) < 2:
            raise ValueError("audiogram needs at least two points")
        freqs = [f for f, _ in pts]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("audiogram frequencies must be strictly increasing")
        if freqs[0] > 250 or freqs[-1] < 8000:
            raise ValueError("audiogram must cover 250-8000 Hz")
        if any(not 0 <= t <= 120 for _, t in pts):
            raise ValueError("thresholds must lie in [0, 120] dB HL")
        object.__setattr__(self, "points", pts)

    @classmethod
    def flat(cls, level_db: float) -> "Audiogram":
        return cls(tuple((f, level_db) for f in AUDIOMETRIC_FREQS))

    @classmethod
    def from_thresholds(cls, thresholds: Sequence[float], freqs=AUDIOMETRIC_FREQS) -> "Audiogram":
        return cls(tuple(zip(freqs, thresholds)))

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([f for f, _ in self.points])

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([t for _, t in self.points])

    def threshold_at(self, freq_hz):
        """Threshold interpolated linearly in log frequency, clamped at the ends."""
        return np.interp(np.log(freq_hz), np.log(self.frequencies), self.thresholds)

    def to_list(self):
        return [[f, t] for f, t in self.points]


#: Sloping age-related loss used for the CND sweep
SLOPING_LOSS = Audiogram.from_thresholds((0, 0, 10, 20, 23, 45, 75))


@dataclass(frozen=True)
class CNDProfile:
    """Surviving fibers per CF for the LS, MS and HS classes."""

    n_ls: int = 5
    n_ms: int = 5
    n_hs: int = 12

    BASELINE = (5, 5, 12)

    def __post_init__(self):
        for n, cap, name in zip(self.counts, self.BASELINE, ("LS", "MS", "HS")):
            if int(n) != n or n < 0:
                raise ValueError(f"{name} fiber count must be a non-negative integer")
            if n > cap:
                raise ValueError(f"{name} fiber count {n} exceeds the no-CND baseline {cap}")

    @property
    def counts(self) -> Tuple[int, int, int]:
        return (self.n_ls, self.n_ms, self.n_hs)

    def count(self, fiber: FiberType) -> int:
        return self.counts[FiberType(fiber).index]

    @property
    def empty(self) -> bool:
        return sum(self.counts) == 0


NO_CND = CNDProfile()


@dataclass(frozen=True)
class PeripheryConfig:
    """Discretization and model constants of the periphery.

    ``hs_midpoint_db_spl`` anchors the HS rate-level midpoint on the
    instantaneous-drive scale (dB re 20 uPa at CF); other classes are
    offset from it by their ``threshold_db``.
    """

    n_cf: int = 40
    cf_min_hz: float = 125.0
    cf_max_hz: float = 8000.0
    internal_rate_hz: float = 100_000.0
    n_reps: int = 50
    ft_bin_s: float = 1e-4
    seed: int = 0
    hs_midpoint_db_spl: float = 30.0
    broadening: float = 2.0
    ohc_max_db: float = 55.0
    lowpass_hz: float = 3000.0
    lowpass_order: int = 2
    fibers: Dict[FiberType, FiberParams] = field(default_factory=lambda: dict(DEFAULT_FIBER_PARAMS))

    def __post_init__(self):
        if self.n_cf < 2:
            raise ValueError("n_cf must be at least 2")
        if not self.cf_min_hz < self.cf_max_hz:
            raise ValueError("cf_min_hz must be below cf_max_hz")
        if not self.ft_bin_s > 0:
            raise ValueError("ft_bin_s must be positive")
        if self.n_reps < 1:
            raise ValueError("n_reps must be at least 1")
        if self.ft_bin_s * self.internal_rate_hz < 1 - 1e-9:
            raise ValueError("ft_bin_s shorter than one internal sample")
        if self.cf_max_hz >= self.internal_rate_hz / 2:
            raise ValueError("cf_max_hz must be below the internal Nyquist frequency")
        fibers = {FiberType(k): v for k, v in self.fibers.items()}
        ls, ms, hs = fibers[FiberType.LS], fibers[FiberType.MS], fibers[FiberType.HS]
        if not (ls.threshold_db > ms.threshold_db > hs.threshold_db):
            raise ValueError("fiber thresholds must be ordered LS > MS > HS")
        if not (ls.spont < ms.spont < hs.spont):
            raise ValueError("spontaneous rates must be ordered LS < MS < HS")
        object.__setattr__(self, "fibers", fibers)

    def with_(self, **kw) -> "PeripheryConfig":
        return replace(self, **kw)

    def fiber_threshold_db_spl(self, fiber: FiberType) -> float:
        return self.hs_midpoint_db_spl + self.fibers[FiberType(fiber)].threshold_db

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "n_cf", "cf_min_hz", "cf_max_hz", "internal_rate_hz", "n_reps", "ft_bin_s", "seed",
            "hs_midpoint_db_spl", "broadening", "ohc_max_db", "lowpass_hz", "lowpass_order")}
        d["fibers"] = {
            f.value: {"spont": p.spont, "threshold_db": p.threshold_db,
                      "saturation": p.saturation, "dynamic_range_db": p.dynamic_range_db}
            for f, p in sorted(self.fibers.items(), key=lambda kv: kv[0].index)
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PeripheryConfig":
        d = dict(d)
        fibers = dict(DEFAULT_FIBER_PARAMS)
        for name, p in d.pop("fibers", {}).items():
            fibers[FiberType(name)] = FiberParams(**p)
        return cls(fibers=fibers, **d)


@dataclass
class PSTH:
    """Spike counts per time bin for one CF and fiber type, summed over
    fibers and repetitions."""

    counts: np.ndarray
    bin_width_s: float
    cf_hz: float
    fiber_type: str
    absent: bool = False
    truncated: bool = False

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1:
            raise ValueError("PSTH counts must be one-dimensional")
        if np.any(c < 0):
            raise ValueError("PSTH counts must be non-negative")
        if not self.bin_width_s > 0:
            raise ValueError("bin width must be positive")
        self.counts = c


def cf_grid(config: PeripheryConfig) -> np.ndarray:
    """Log-spaced CFs from ``cf_min_hz`` to ``cf_max_hz`` inclusive."""
    return np.geomspace(config.cf_min_hz, config.cf_max_hz, config.n_cf)


def erb(cf_hz):
    """Equivalent rectangular bandwidth of the normal auditory filter (Hz)."""
    return 24.7 * (4.37e-3 * np.asarray(cf_hz, dtype=float) + 1.0)


def ohc_gain_reduction(audiogram: Audiogram, cf_hz, max_ohc_db: float = 55.0):
    """Outer-hair-cell gain loss at `cf_hz`, capped at `max_ohc_db`.

    The whole audiometric shift is attributed to OHC loss up to the cap;
    any excess is ignored.
    """
    return np.minimum(audiogram.threshold_at(cf_hz), max_ohc_db)


def _gammatone(x: np.ndarray, fs: float, cf: float, bandwidth: float, order: int = 4) -> np.ndarray:
    # cascade of complex one-pole sections, unit gain at cf
    b = bandwidth / (math.pi * math.factorial(2 * order - 2) * 2.0 ** (-(2 * order - 2))
                     / math.factorial(order - 1) ** 2)
    lam = math.exp(-2 * math.pi * b / fs)
    coef = lam * np.exp(2j * math.pi * cf / fs)
    y = x.astype(complex)
    for _ in range(order):
        y = signal.lfilter([1 - lam], [1, -coef], y)
    return 2.0 * y.real


def band_drive(pressure: Waveform, cf_hz: float, audiogram: Audiogram,
               config: PeripheryConfig = PeripheryConfig()) -> np.ndarray:
    """Instantaneous drive of the CF channel, in units of 20 uPa.

    The gammatone bandwidth is ``erb(cf) * (1 + broadening * loss / ohc_max)``
    and the passband gain is lowered by the OHC loss before rectification.
    """
    loss = float(ohc_gain_reduction(audiogram, cf_hz, config.ohc_max_db))
    bw = float(erb(cf_hz)) * (1.0 + config.broadening * loss / config.ohc_max_db)
    fs = pressure.sample_rate
    y = _gammatone(pressure.samples, fs, cf_hz, bw) * 10 ** (-loss / 20) / P_REF
    y = np.maximum(y, 0.0)
    b, a = signal.butter(config.lowpass_order, config.lowpass_hz, fs=fs)
    # Butterworth overshoot can dip a hair below zero
    return np.maximum(signal.lfilter(b, a, y), 0.0)


def fiber_rate(drive, fiber: FiberParams, threshold_db_spl: float) -> np.ndarray:
    """Instantaneous discharge rate (spikes/s) for a drive sequence.

    ``rate = spont + (sat - spont) / (1 + exp(-4 (x - thr) / dr))`` with
    ``x = 20 log10(drive)``; zero drive gives exactly the spontaneous rate.
    """
    drive = np.asarray(drive, dtype=float)
    if np.any(drive < 0):
        raise ValueError("drive must be non-negative")
    with np.errstate(divide="ignore"):
        x = 20.0 * np.log10(drive)
    s = special.expit(4.0 * (x - threshold_db_spl) / fiber.dynamic_range_db)
    return fiber.spont + (fiber.saturation - fiber.spont) * s


def task_seed(master_seed: int, cf_index: int, fiber: FiberType) -> np.random.SeedSequence:
    """Seed for one ``(CF, fiber type)`` spike stream, independent of scheduling."""
    return np.random.SeedSequence([int(master_seed), int(cf_index), FiberType(fiber).index])


def poisson_inverse_cdf(u: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Smallest k with ``P(K <= k) >= u`` for ``K ~ Poisson(lam)``.

    Small means use an exact vectorized CDF walk; large means (where
    ``exp(-lam)`` underflows or the walk would be long) use scipy's
    incomplete-gamma inverse.
    """
    u = np.asarray(u, dtype=float)
    lam = np.asarray(lam, dtype=float)
    k = np.zeros(lam.shape)
    small = lam <= 60.0
    if np.any(small):
        idx = np.flatnonzero(small.ravel())
        ls, us = lam.ravel()[idx], u.ravel()[idx]
        p = np.exp(-ls)
        c = p.copy()
        keep = us > c
        idx, ls, us, p, c = idx[keep], ls[keep], us[keep], p[keep], c[keep]
        kflat = k.ravel()
        j = 0
        while idx.size and j < 400:  # past 400 the cdf is 1 to rounding
            j += 1
            kflat[idx] = j
            p = p * ls / j
            c = c + p
            keep = us > c
            idx, ls, us, p, c = idx[keep], ls[keep], us[keep], p[keep], c[keep]
        k = kflat.reshape(lam.shape)
    big = ~small
    if np.any(big):
        k[big] = np.ceil(special.pdtrik(u[big], lam[big]))
    return k.astype(np.int64)


def _bin_means(rate: np.ndarray, rate_fs: float, bin_width_s: float) -> np.ndarray:
    per_bin = bin_width_s * rate_fs
    n = int(round(per_bin))
    if n < 1 or abs(per_bin - n) > 1e-6:
        raise ValueError("bin width must be a whole number of rate samples")
    m = rate.size // n
    return rate[: m * n].reshape(m, n).sum(axis=1) / rate_fs


def spike_psth(rate, bin_width_s: float, n_reps: int, seed, rate_fs: float = 100_000.0,
               n_fibers: int = 1, cf_hz: float = 0.0, fiber_type: str = "") -> PSTH:
    """Poisson spike counts for `n_fibers` x `n_reps` independent trials.

    `seed` may be an int, a ``SeedSequence`` or a precomputed array of
    uniforms (one per bin) for common-random-number sampling.
    """
    rate = np.asarray(rate, dtype=float)
    if bin_width_s < 1 / rate_fs - 1e-15:
        raise ValueError("bin width shorter than the rate sampling interval")
    means = _bin_means(rate, rate_fs, bin_width_s)
    if isinstance(seed, np.ndarray):
        u = seed[: means.size]
    else:
        u = np.random.default_rng(seed).random(means.size)
    lam = means * (n_fibers * n_reps)
    counts = poisson_inverse_cdf(u, lam) if n_fibers > 0 else np.zeros(means.size, np.int64)
    return PSTH(counts, bin_width_s, cf_hz, fiber_type, absent=(n_fibers == 0))


@dataclass
class BankRates:
    """Per-fiber, per-repetition expected spike count in each time bin.

    ``means`` has shape ``(3, n_cf, n_bins)`` ordered LS, MS, HS.
    """

    means: np.ndarray
    cfs: np.ndarray
    bin_width_s: float
    config: PeripheryConfig

    @property
    def n_bins(self) -> int:
        return self.means.shape[2]


def fiber_bank_rates(stimulus: Waveform, audiogram: Audiogram,
                     config: PeripheryConfig = PeripheryConfig()) -> BankRates:
    """Deterministic part of the periphery: expected counts per bin."""
    x = resample(stimulus, config.internal_rate_hz)
    cfs = cf_grid(config)
    fs = config.internal_rate_hz
    rows = []
    for cf in cfs:
        drive = band_drive(x, cf, audiogram, config)
        rows.append([
            _bin_means(fiber_rate(drive, config.fibers[ft], config.fiber_threshold_db_spl(ft)),
                       fs, config.ft_bin_s)
            for ft in FiberType
        ])
    means = np.transpose(np.array(rows), (1, 0, 2))
    return BankRates(means, cfs, config.ft_bin_s, config)


def spike_uniforms(config: PeripheryConfig, n_cf: int, n_bins: int) -> np.ndarray:
    """Uniform variates per (fiber type, CF, bin) from the per-stream seeds."""
    u = np.empty((3, n_cf, n_bins))
    for ft in FiberType:
        for i in range(n_cf):
            u[ft.index, i] = np.random.default_rng(task_seed(config.seed, i, ft)).random(n_bins)
    return u


def draw_fiber_bank(rates: BankRates, cnd: CNDProfile,
                    uniforms: Optional[np.ndarray] = None) -> Dict[FiberType, List[PSTH]]:
    """Poisson PSTHs for every CF and fiber type given surviving fiber counts."""
    if cnd.empty:
        raise ValueError("CND profile has no surviving fibers")
    cfg = rates.config
    n_cf, n_bins = rates.means.shape[1:]
    if uniforms is None:
        uniforms = spike_uniforms(cfg, n_cf, n_bins)
    out = {}
    for ft in FiberType:
        count = cnd.count(ft)
        lam = rates.means[ft.index] * (count * cfg.n_reps)
        if count:
            counts = poisson_inverse_cdf(uniforms[ft.index], lam)
        else:
            counts = np.zeros((n_cf, n_bins), np.int64)
        out[ft] = [PSTH(counts[i], rates.bin_width_s, float(rates.cfs[i]), ft.value, absent=count == 0)
                   for i in range(n_cf)]
    return out


def simulate_fiber_bank(stimulus: Waveform, audiogram: Audiogram, cnd: CNDProfile,
                        config: PeripheryConfig = PeripheryConfig()) -> Dict[FiberType, List[PSTH]]:
    """PSTHs of the summed activity of each fiber population at every CF.

    Returns a mapping ``FiberType -> [PSTH per CF]``; populations with no
    surviving fibers are all-zero and flagged ``absent``.
    """
    if cnd.empty:
        raise ValueError("CND profile has no surviving fibers")
    return draw_fiber_bank(fiber_bank_rates(stimulus, audiogram, config), cnd)
