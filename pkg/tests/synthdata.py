"""Synthetic hearing-loss feature table standing in for the non-public listener data."""

import numpy as np

from neuracoustic.regression import FeatureRow


def synthetic_rows(n=94, seed=2024, noise_sd=0.02):
    """`n` rows whose score is a clamped monotone function of all three features.

    MR and FT NSIM share a common hearing-loss factor but each carries its own
    variation, and PTA adds information neither NSIM feature holds, so a model
    using all three should beat MR alone.
    """
    rng = np.random.default_rng(seed)
    loss = rng.uniform(0, 1, n)
    mr = np.clip(1.0 - 0.35 * loss + rng.normal(0, 0.06, n), 0.3, 1.0)
    ft = np.clip(0.95 - 0.25 * loss + rng.normal(0, 0.06, n), 0.3, 1.0)
    pta = np.clip(70 * loss + rng.normal(0, 10, n), 0, 100)
    raw = 1.2 * mr + 1.0 * ft - 0.008 * pta - 1.1
    score = np.clip(np.clip(raw, 0, 1) + rng.normal(0, noise_sd, n), 0, 1)
    return [FeatureRow(f"p{i:03d}", float(a), float(b), float(c), float(s))
            for i, (a, b, c, s) in enumerate(zip(mr, ft, pta, score))]
