"""
Cochlear-neuropathy sweep
=========================

A reduced Study-2 style sweep: three synthetic words, two levels, clean
speech, the seven CND profiles on the sloping audiogram. Results are written
as CSV tables and an SVG chart under ``demo_output/``.
"""

from pathlib import Path

from neuracoustic import PeripheryConfig, StimulusCondition, emit_report, study2_sweep, table2_profiles
from neuracoustic.stimulus import load_manifest
from neuracoustic.synth import write_desk_corpus

out = Path("demo_output") / "cnd_sweep"
corpus = load_manifest(write_desk_corpus(out / "corpus", n_words=3))

res = study2_sweep(corpus, table2_profiles(), levels=(50.0, 95.0),
                   conditions=[StimulusCondition("clean")], periphery=PeripheryConfig(seed=1),
                   cache_dir=out / "cache")
print(f"{res.n_computed} cells computed, {res.n_cached} from cache")

print("\nMR CND effect (fraction of NSIM lost relative to no CND)")
print("profile         50 dB    95 dB")
for pid in res.profile_order:
    e = {p.level_db_spl: p.cnd_effect for p in res.effects if p.profile_id == pid and p.kind == "MR"}
    print(f"{pid:14s} {e[50.0]:7.3f}  {e[95.0]:7.3f}")

for p in emit_report(res.records, out, res.profile_order, res.condition_order):
    print("wrote", p)
