"""
Neurograms for one word
=======================

Simulate the fiber bank for one synthetic CVC token at 65 dB SPL, with normal
hearing and with the sloping loss, and compare their MR and FT neurograms
fiber class by fiber class.
"""

from neuracoustic import (
    NO_CND, SLOPING_LOSS, Audiogram, PeripheryConfig, StimulusCondition, neurograms_from_bank,
    nsim, overall_nsim, prepare_stimulus, simulate_fiber_bank,
)
from neuracoustic.synth import synth_cvc

word = synth_cvc(4)
print(f"token: {word.duration:.3f} s at {word.sample_rate:g} Hz")

stim = prepare_stimulus(word, StimulusCondition("clean"), 65.0)
config = PeripheryConfig(seed=7)

normal = neurograms_from_bank(simulate_fiber_bank(stim, Audiogram.flat(0), NO_CND, config))
impaired = neurograms_from_bank(simulate_fiber_bank(stim, SLOPING_LOSS, NO_CND, config))

for kind in ("MR", "FT"):
    n = normal["SUM", kind]
    print(f"\n{kind}: {n.values.shape[0]} CFs x {n.values.shape[1]} bins of {n.bin_width_s * 1e3:g} ms")
    scores = {f: nsim(normal[f, kind], impaired[f, kind]).nsim for f in ("LS", "MS", "HS", "SUM")}
    for f, s in scores.items():
        print(f"  {f:3s} NSIM = {s:.4f}")
    print(f"  overall (mean of LS, MS, HS) = {overall_nsim(scores['LS'], scores['MS'], scores['HS']):.4f}")
