"""Windowed structural similarity for neurograms.

Three measures share one windowed-statistics core:

* :func:`ssi` -- full luminance x contrast x structure index with exponents.
* :func:`nsi_map` -- luminance x structure only, the neurogram measure.
* :func:`nsim` -- mean of the NSI map over every interior 3x3 window.

All windows are evaluated fully inside the matrices (no padding), so an
``N x M`` input yields an ``(N-2) x (M-2)`` map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "WindowKernel",
    "SimilarityConfig",
    "SimilarityResult",
    "gaussian_window",
    "similarity_constants",
    "bind_intensity_range",
    "local_stats",
    "windowed_stats",
    "ssi",
    "nsi_map",
    "nsim",
    "overall_nsim",
]


@dataclass(frozen=True)
class WindowKernel:
    """Normalized 3x3 weighting kernel."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (3, 3):
            raise ValueError("window kernel must be 3x3")
        if not np.allclose(w, w.T) or not np.allclose(w, w[::-1, ::-1]):
            raise ValueError("window kernel must be symmetric")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("window weights must sum to 1")
        object.__setattr__(self, "weights", w)

    @property
    def size(self):
        return self.weights.shape


def gaussian_window(radius: float = 0.5) -> WindowKernel:
    """3x3 Gaussian kernel with standard deviation `radius`, summing to one.

    >>> round(float(gaussian_window().weights[1, 1]), 5)
    0.61935
    """
    offsets = np.array([-1.0, 0.0, 1.0])
    df, dt = np.meshgrid(offsets, offsets, indexing="ij")
    w = np.exp(-(df**2 + dt**2) / (2.0 * radius**2))
    return WindowKernel(w / w.sum())


@dataclass(frozen=True)
class SimilarityConfig:
    """Constants rule, exponents and intensity-range binding.

    Parameters
    ----------
    constants : {'paper', 'standard'}
        ``paper`` uses C1 = 0.01 L; ``standard`` uses C1 = (0.01 L)**2.
        Both use C2 = (0.03 L)**2 and C3 = C2 / 2.
    alpha, beta, gamma : float
        Exponents of the luminance, contrast and structure terms (SSI only).
    l_mode : {'reference_max', 'pair_max'} or float
        How the intensity range L is bound. A number fixes L.
    window : WindowKernel
    """

    constants: str = "paper"
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    l_mode: Union[str, float] = "reference_max"
    window: WindowKernel = field(default_factory=gaussian_window)

    def __post_init__(self):
        if self.constants not in ("paper", "standard"):
            raise ValueError(f"unknown constants rule {self.constants!r}")
        if isinstance(self.l_mode, str):
            if self.l_mode not in ("reference_max", "pair_max"):
                raise ValueError(f"unknown l_mode {self.l_mode!r}")
        elif not float(self.l_mode) > 0:
            raise ValueError("fixed intensity range must be positive")


@dataclass
class SimilarityResult:
    nsim: float
    nsi_map: np.ndarray
    n_windows: int
    l_used: float


def _values(x) -> np.ndarray:
    arr = np.asarray(getattr(x, "values", x), dtype=float)
    if arr.ndim != 2:
        raise ValueError("neurograms must be 2-D matrices")
    if not np.all(np.isfinite(arr)):
        raise ValueError("neurogram contains non-finite values")
    return arr


def _check_pair(r, d):
    r, d = _values(r), _values(d)
    if r.shape != d.shape:
        raise ValueError(f"shape mismatch: reference {r.shape} vs degraded {d.shape}")
    if r.shape[0] < 3 or r.shape[1] < 3:
        raise ValueError(f"neurogram {r.shape} too small for 3x3 window")
    return r, d


def similarity_constants(intensity_range: float, rule: str = "paper"):
    """Return ``(C1, C2, C3)`` for intensity range `L`."""
    L = float(intensity_range)
    c1 = 0.01 * L if rule == "paper" else (0.01 * L) ** 2
    c2 = (0.03 * L) ** 2
    if not c2 / 2.0 > 0 or not c1 > 0:
        # flat windows would give 0/0
        raise ValueError(f"intensity range {L!r} too small: stabilizing constants underflow to zero")
    return c1, c2, c2 / 2.0


def bind_intensity_range(r, d, config: SimilarityConfig) -> float:
    r, d = _values(r), _values(d)
    if not isinstance(config.l_mode, str):
        return float(config.l_mode)
    if config.l_mode == "pair_max":
        L = float(max(r.max(), d.max()))
    else:
        L = float(r.max())
    if not L > 0:
        raise ValueError("all-zero reference neurogram: intensity range undefined")
    return L


def local_stats(r, d, kernel: WindowKernel, f: int, t: int):
    """Weighted window statistics centred on row `f`, column `t`.

    Returns ``(mu_r, mu_d, sigma_r, sigma_d, sigma_rd)`` using population
    (weights-sum-to-one) moments.
    """
    r, d = _values(r), _values(d)
    if r.shape != d.shape:
        raise ValueError(f"shape mismatch: reference {r.shape} vs degraded {d.shape}")
    if not (1 <= f < r.shape[0] - 1 and 1 <= t < r.shape[1] - 1):
        raise ValueError("window must lie fully inside the neurogram")
    w = kernel.weights
    wr = r[f - 1 : f + 2, t - 1 : t + 2]
    wd = d[f - 1 : f + 2, t - 1 : t + 2]
    mu_r = float(np.sum(w * wr))
    mu_d = float(np.sum(w * wd))
    dr, dd = wr - mu_r, wd - mu_d
    return (
        mu_r,
        mu_d,
        math.sqrt(float(np.sum(w * dr * dr))),
        math.sqrt(float(np.sum(w * dd * dd))),
        float(np.sum(w * dr * dd)),
    )


def windowed_stats(r, d, kernel: WindowKernel):
    """Vectorized :func:`local_stats` over every interior window.

    Each output has shape ``(N-2, M-2)``. Moments are taken about the window
    mean (two-pass) so large spike counts do not cancel catastrophically.
    """
    r, d = _check_pair(r, d)
    w = kernel.weights
    pr = sliding_window_view(r, (3, 3))
    pd = sliding_window_view(d, (3, 3))
    mu_r = np.einsum("ijkl,kl->ij", pr, w)
    mu_d = np.einsum("ijkl,kl->ij", pd, w)
    dr = pr - mu_r[:, :, None, None]
    dd = pd - mu_d[:, :, None, None]
    var_r = np.einsum("ijkl,kl->ij", dr * dr, w)
    var_d = np.einsum("ijkl,kl->ij", dd * dd, w)
    cov = np.einsum("ijkl,kl->ij", dr * dd, w)
    return mu_r, mu_d, np.sqrt(var_r), np.sqrt(var_d), cov


def _terms(r, d, config: SimilarityConfig):
    L = bind_intensity_range(r, d, config)
    c1, c2, c3 = similarity_constants(L, config.constants)
    mu_r, mu_d, s_r, s_d, s_rd = windowed_stats(r, d, config.window)
    lum = (2 * mu_r * mu_d + c1) / (mu_r**2 + mu_d**2 + c1)
    con = (2 * s_r * s_d + c2) / (s_r**2 + s_d**2 + c2)
    struct = (s_rd + c3) / (s_r * s_d + c3)
    return lum, con, struct, L


def _mean(values: np.ndarray) -> float:
    # fsum is exactly rounded, so the mean does not depend on how the map was tiled
    return math.fsum(values.ravel().tolist()) / values.size


def ssi(r, d, config: SimilarityConfig = SimilarityConfig()):
    """Three-term structural similarity map and its mean.

    With ``constants='standard'`` and unit exponents this is the classic
    SSIM on a 3x3 Gaussian window. Note the contrast term is written
    ``(2 sigma_r sigma_d + C2) / (...)``.

    Returns
    -------
    (ndarray, float)
    """
    lum, con, struct, _ = _terms(r, d, config)
    smap = lum**config.alpha * con**config.beta * struct**config.gamma
    return smap, _mean(smap)


def nsi_map(r, d, config: SimilarityConfig = SimilarityConfig()) -> np.ndarray:
    """Per-window luminance x structure similarity. Values are not clamped."""
    lum, _, struct, _ = _terms(r, d, config)
    return lum * struct


def nsim(r, d, config: SimilarityConfig = SimilarityConfig()) -> SimilarityResult:
    """Neurogram similarity of degraded `d` against reference `r`."""
    lum, _, struct, L = _terms(r, d, config)
    m = lum * struct
    return SimilarityResult(nsim=_mean(m), nsi_map=m, n_windows=int(m.size), l_used=L)


def overall_nsim(ls: float, ms: float, hs: float) -> float:
    """Equal-weight mean of the three per-fiber-type NSIM values."""
    vals = (float(ls), float(ms), float(hs))
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("per-fiber NSIM values must be finite")
    return math.fsum(vals) / 3.0
