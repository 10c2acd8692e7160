"""Slow, loop-by-loop SSIM used to cross-check the vectorized similarity core.

Written with scalar arithmetic only (no convolution, no array broadcasting)
so it shares no code path with :mod:`neuracoustic.similarity`.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["gaussian_weights_3x3", "direct_ssim_map", "direct_nsi_map"]


def gaussian_weights_3x3(radius: float = 0.5):
    raw = [[math.exp(-(a * a + b * b) / (2 * radius * radius)) for b in (-1, 0, 1)] for a in (-1, 0, 1)]
    total = sum(sum(row) for row in raw)
    return [[v / total for v in row] for row in raw]


def _window_moments(r, d, i, j, w):
    mr = md = 0.0
    for a in range(3):
        for b in range(3):
            mr += w[a][b] * r[i + a][j + b]
            md += w[a][b] * d[i + a][j + b]
    vr = vd = cov = 0.0
    for a in range(3):
        for b in range(3):
            er = r[i + a][j + b] - mr
            ed = d[i + a][j + b] - md
            vr += w[a][b] * er * er
            vd += w[a][b] * ed * ed
            cov += w[a][b] * er * ed
    return mr, md, math.sqrt(vr), math.sqrt(vd), cov


def direct_ssim_map(r, d, L: float, radius: float = 0.5) -> np.ndarray:
    """Classic SSIM, constants ``(0.01 L)^2``, ``(0.03 L)^2``, ``C2/2``."""
    r, d = np.asarray(r, float).tolist(), np.asarray(d, float).tolist()
    w = gaussian_weights_3x3(radius)
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    c3 = c2 / 2
    rows, cols = len(r) - 2, len(r[0]) - 2
    out = np.empty((rows, cols))
    for i in range(rows):
        for j in range(cols):
            mr, md, sr, sd, cov = _window_moments(r, d, i, j, w)
            lum = (2 * mr * md + c1) / (mr * mr + md * md + c1)
            con = (2 * sr * sd + c2) / (sr * sr + sd * sd + c2)
            st = (cov + c3) / (sr * sd + c3)
            out[i, j] = lum * con * st
    return out


def direct_nsi_map(r, d, L: float, rule: str = "paper", radius: float = 0.5) -> np.ndarray:
    """Luminance x structure per window."""
    r, d = np.asarray(r, float).tolist(), np.asarray(d, float).tolist()
    w = gaussian_weights_3x3(radius)
    c1 = 0.01 * L if rule == "paper" else (0.01 * L) ** 2
    c3 = (0.03 * L) ** 2 / 2
    rows, cols = len(r) - 2, len(r[0]) - 2
    out = np.empty((rows, cols))
    for i in range(rows):
        for j in range(cols):
            mr, md, sr, sd, cov = _window_moments(r, d, i, j, w)
            out[i, j] = (2 * mr * md + c1) / (mr * mr + md * md + c1) * (cov + c3) / (sr * sd + c3)
    return out
