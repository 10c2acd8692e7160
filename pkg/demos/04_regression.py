"""
Predicting scores from neurogram features
=========================================

Study 1 regresses listener scores on MR-NSIM, FT-NSIM and the pure-tone
average. Listener data are not available, so this script first extracts
real features for a handful of flat audiograms, then fits the SVR on a
synthetic table with the same columns.
"""

import numpy as np

from neuracoustic import (
    FEATURES, Audiogram, FeatureRow, HearingProfile, PeripheryConfig, grid_search, study1_features,
    table3_grid,
)
from neuracoustic.synth import synth_cvc

# Features from the model: 10 tokens at 65 dB SPL, four flat losses.
# A coarse periphery keeps this quick.
quick = PeripheryConfig(n_cf=16, n_reps=20)
stimuli = [(f"w{i}", synth_cvc(i)) for i in range(10)]
profiles = [HearingProfile(f"flat{x}", Audiogram.flat(x)) for x in (0, 20, 40, 60)]
for r in study1_features(stimuli, profiles, periphery=quick):
    print(f"{r.profile_id:7s} MR={r.mr_nsim:.3f} FT={r.ft_nsim:.3f} PTA={r.pta_db:.0f}")

# Synthetic listeners: score is a clamped monotone function of the features.
rng = np.random.default_rng(0)
rows = []
for i in range(94):
    loss = rng.uniform()
    mr = float(np.clip(1 - 0.35 * loss + rng.normal(0, 0.06), 0.3, 1))
    ft = float(np.clip(0.95 - 0.25 * loss + rng.normal(0, 0.06), 0.3, 1))
    pta = float(np.clip(70 * loss + rng.normal(0, 10), 0, 100))
    s = float(np.clip(np.clip(1.2 * mr + ft - 0.008 * pta - 1.1, 0, 1) + rng.normal(0, 0.02), 0, 1))
    rows.append(FeatureRow(f"s{i:03d}", mr, ft, pta, s))

for feats in (("mr_nsim",), ("ft_nsim",), ("mr_nsim", "ft_nsim"), FEATURES):
    hp, rep = grid_search(rows, feats, table3_grid(), k=3, seed=0)
    print(f"{'+'.join(feats):26s} mse={rep.mse:.4f} r2={rep.r2:.3f}  C={hp.c} eps={hp.epsilon} "
          f"gamma={hp.gamma} kernel={hp.kernel}")
