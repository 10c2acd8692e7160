"""
NSIM on hand-made matrices
==========================

The similarity index compares a reference neurogram with a degraded one,
window by window, using a 3x3 Gaussian kernel. This script builds a few toy
matrices and shows how intensity and structure changes move the score.
"""

import numpy as np

from neuracoustic import SimilarityConfig, gaussian_window, nsim

# The kernel: a 3x3 Gaussian with radius 0.5, normalised to sum to one.
print("window weights:\n", np.round(gaussian_window().weights, 5))

rng = np.random.default_rng(0)
ref = rng.gamma(2.0, 2.0, size=(20, 60))

# Identical inputs score exactly one.
print("nsim(ref, ref)      = %.6f" % nsim(ref, ref).nsim)

# Halving the activity keeps the structure but drops the luminance term.
print("nsim(ref, ref / 2)  = %.6f" % nsim(ref, ref / 2).nsim)

# Adding noise leaves the mean alone but erodes structure.
noisy = np.clip(ref + rng.normal(0, 2.0, ref.shape), 0, None)
print("nsim(ref, noisy)    = %.6f" % nsim(ref, noisy).nsim)

# Reversing time keeps every marginal statistic but scrambles structure.
print("nsim(ref, reversed) = %.6f" % nsim(ref, ref[:, ::-1]).nsim)

# Constants rule and intensity range are configurable. With a louder
# degraded input, pair_max binds L to the degraded maximum instead.
louder = 1.5 * noisy
for cfg in (SimilarityConfig(), SimilarityConfig(constants="standard"),
            SimilarityConfig(l_mode="pair_max")):
    r = nsim(ref, louder, cfg)
    print(f"{cfg.constants:8s} {str(cfg.l_mode):14s} L={r.l_used:7.3f} nsim={r.nsim:.6f}")
