"""Study orchestration: hearing-loss features for regression, and the CND sweep.

Every comparison uses the same reference: a normal cochlea (flat 0 dB HL,
full 5/5/12 fiber complement) driven by the same stimulus with the same
master seed. Study 1 compares pooled-fiber (``SUM``) neurograms; the CND
sweep compares each fiber type separately and averages the three scores.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .neurogram import NeurogramSpec, neurograms_from_bank
from .periphery import (NO_CND, SLOPING_LOSS, Audiogram, CNDProfile, PeripheryConfig,
                        spike_uniforms, draw_fiber_bank, fiber_bank_rates)
from .regression import FeatureRow
from .similarity import SimilarityConfig, nsim, overall_nsim
from .stimulus import (CorpusManifest, StimulusCondition, Waveform, file_digest, load_wav,
                       prepare_stimulus)

log = logging.getLogger(__name__)

__all__ = [
    "HearingProfile",
    "StudyRecord",
    "CNDEffectPoint",
    "Study2Result",
    "NORMAL_HEARING",
    "CellError",
    "CellCache",
    "pta",
    "table2_profiles",
    "default_conditions",
    "study1_features",
    "study2_sweep",
    "cnd_effect",
    "cnd_effect_points",
    "mean_records",
]

FIBERS = ("LS", "MS", "HS")
KINDS = ("MR", "FT")
CACHE_VERSION = 1


@dataclass(frozen=True)
class HearingProfile:
    id: str
    audiogram: Audiogram
    cnd: CNDProfile = NO_CND
    description: str = ""

    def to_dict(self):
        return {"id": self.id, "audiogram": self.audiogram.to_list(), "cnd": list(self.cnd.counts),
                "description": self.description}

    @classmethod
    def from_dict(cls, d):
        return cls(str(d["id"]), Audiogram(tuple(map(tuple, d["audiogram"]))),
                   CNDProfile(*d.get("cnd", CNDProfile.BASELINE)), d.get("description", ""))


NORMAL_HEARING = HearingProfile("normal", Audiogram.flat(0.0), NO_CND, "normal cochlea reference")


@dataclass(frozen=True)
class StudyRecord:
    word_id: str
    profile_id: str
    level_db_spl: float
    condition: str
    fiber_type: str
    kind: str
    nsim: float

    def __post_init__(self):
        if not math.isfinite(self.nsim):
            raise ValueError(f"non-finite NSIM for {self.key}")

    @property
    def key(self):
        return (self.word_id, self.profile_id, self.level_db_spl, self.condition, self.fiber_type, self.kind)


@dataclass(frozen=True)
class CNDEffectPoint:
    profile_id: str
    level_db_spl: float
    condition: str
    kind: str
    cnd_effect: float


@dataclass
class Study2Result:
    records: List[StudyRecord]  # averaged over words, word_id "all"
    word_records: List[StudyRecord]
    effects: List[CNDEffectPoint]
    profile_order: List[str]
    condition_order: List[str]
    n_computed: int = 0
    n_cached: int = 0


class CellError(RuntimeError):
    """A sweep cell failed; the message names the cell."""


def pta(audiogram: Audiogram) -> float:
    """Pure-tone average over 500, 1000, 2000 and 4000 Hz.

    Missing frequencies are interpolated in log frequency.
    """
    f = audiogram.frequencies
    if f[0] > 500 or f[-1] < 4000:
        raise ValueError("audiogram must cover 500-4000 Hz for a pure-tone average")
    return float(np.mean(audiogram.threshold_at(np.array([500.0, 1000.0, 2000.0, 4000.0]))))


def table2_profiles(base: Audiogram = SLOPING_LOSS) -> List[HearingProfile]:
    """The seven CND profiles on the sloping loss, in table order."""
    rows = [("no_cnd", (5, 5, 12), "no CND"),
            ("lsms20", (4, 4, 12), "20% LS/MS loss"),
            ("lsms40", (3, 3, 12), "40% LS/MS loss"),
            ("lsms60", (2, 2, 12), "60% LS/MS loss"),
            ("lsms80", (1, 1, 12), "80% LS/MS loss"),
            ("lsms100", (0, 0, 12), "100% LS/MS loss"),
            ("lsms100_hs20", (0, 0, 10), "100% LS/MS loss, 20% HS loss")]
    return [HearingProfile(pid, base, CNDProfile(*c), desc) for pid, c, desc in rows]


def default_conditions(rt60_s: float = 0.5) -> List[StimulusCondition]:
    from .stimulus import ReverbSpec

    return [StimulusCondition("clean"),
            StimulusCondition("comp65", 0.65),
            StimulusCondition("comp65_reverb", 0.65, ReverbSpec(rt60_s, rt60_s, 0))]


def cnd_effect(nsim_no_cnd: float, nsim_cnd: float) -> float:
    """Relative NSIM drop caused by CND; negative when the CND score is higher."""
    if not nsim_no_cnd > 0:
        raise ValueError("baseline NSIM must be positive")
    return (nsim_no_cnd - nsim_cnd) / nsim_no_cnd


# --------------------------------------------------------------------------- cache


class CellCache:
    """One JSON file per completed cell, written atomically."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key):
        return self.dir / f"{key}.json"

    def get(self, key):
        p = self._path(key)
        if not p.exists():
            return None
        with open(p, encoding="utf-8") as fh:
            return json.load(fh)

    def put(self, key, value):
        fd, tmp = tempfile.mkstemp(dir=self.dir, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(value, fh, sort_keys=True)
        os.replace(tmp, self._path(key))


def _content_key(doc) -> str:
    blob = json.dumps(doc, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


# --------------------------------------------------------------------------- cells


def _condition_dict(c: StimulusCondition):
    rv = None if c.reverb is None else {"rt60_s": c.reverb.rt60_s, "ir_length_s": c.reverb.ir_length_s,
                                        "seed": c.reverb.seed}
    return {"name": c.name, "compression_factor": c.compression_factor, "reverb": rv}


def _sim_dict(s: SimilarityConfig):
    return {"constants": s.constants, "l_mode": s.l_mode, "window": s.window.weights.tolist()}


def _compare_cell(stim: Waveform, profiles: Sequence[HearingProfile], periph: PeripheryConfig,
                  spec: NeurogramSpec, sim: SimilarityConfig, fibers, kinds):
    """NSIM of each profile against the normal reference for one prepared stimulus.

    Returns ``{profile_id: {(fiber, kind): nsim}}``. Rates are computed once
    per distinct audiogram; the spike uniforms are shared by all draws.
    """
    ref_rates = fiber_bank_rates(stim, NORMAL_HEARING.audiogram, periph)
    u = spike_uniforms(periph, *ref_rates.means.shape[1:])
    ref = neurograms_from_bank(draw_fiber_bank(ref_rates, NORMAL_HEARING.cnd, u), spec, fibers, kinds)
    rates = {NORMAL_HEARING.audiogram: ref_rates}
    out = {}
    for prof in profiles:
        if prof.audiogram not in rates:
            rates[prof.audiogram] = fiber_bank_rates(stim, prof.audiogram, periph)
        deg = neurograms_from_bank(draw_fiber_bank(rates[prof.audiogram], prof.cnd, u), spec, fibers, kinds)
        out[prof.id] = {key: nsim(ref[key], deg[key], sim).nsim for key in ref}
    return out


def _study2_cell(task):
    word_id, path, level, cond, profiles, periph, spec, sim = task
    try:
        stim = prepare_stimulus(load_wav(path), cond, level)
        res = _compare_cell(stim, profiles, periph, spec, sim, FIBERS, KINDS)
    except Exception as exc:
        raise CellError(f"cell (word={word_id}, level={level}, condition={cond.name}) failed: {exc}") from exc
    return {pid: {f"{f}|{k}": v for (f, k), v in d.items()} for pid, d in res.items()}


def _run_tasks(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def mean_records(word_records: Sequence[StudyRecord]) -> List[StudyRecord]:
    """Average word-level records into ``word_id='all'`` records (first-seen order)."""
    groups: Dict[tuple, List[float]] = {}
    for r in word_records:
        groups.setdefault(r.key[1:], []).append(r.nsim)
    return [StudyRecord("all", *k, nsim=math.fsum(v) / len(v)) for k, v in groups.items()]


def cnd_effect_points(records: Sequence[StudyRecord], baseline_id: str = "no_cnd") -> List[CNDEffectPoint]:
    """CND effect of every profile against `baseline_id` from word-averaged records.

    The per-fiber scores of each ``(profile, level, condition, kind)`` are
    first combined with :func:`overall_nsim`.
    """
    overall: Dict[tuple, Dict[str, float]] = {}
    order = []
    for r in records:
        k = (r.profile_id, r.level_db_spl, r.condition, r.kind)
        if k not in overall:
            overall[k] = {}
            order.append(k)
        overall[k][r.fiber_type] = r.nsim
    points = []
    for k in order:
        pid, level, cond, kind = k
        base = overall.get((baseline_id, level, cond, kind))
        if base is None:
            raise ValueError(f"no baseline profile {baseline_id!r} at level {level}, {cond}")
        b = overall_nsim(*(base[f] for f in FIBERS))
        v = overall_nsim(*(overall[k][f] for f in FIBERS))
        points.append(CNDEffectPoint(pid, level, cond, kind, cnd_effect(b, v)))
    return points


def study2_sweep(corpus: CorpusManifest, profiles: Sequence[HearingProfile],
                 levels: Sequence[float] = (50, 65, 80, 95),
                 conditions: Optional[Sequence[StimulusCondition]] = None,
                 periphery: PeripheryConfig = PeripheryConfig(),
                 neurogram_spec: NeurogramSpec = NeurogramSpec(),
                 similarity: SimilarityConfig = SimilarityConfig(),
                 baseline_id: Optional[str] = None, jobs: int = 1,
                 cache_dir=None, use_cache: bool = True) -> Study2Result:
    """Full factorial sweep of words x levels x conditions x CND profiles.

    One cell is one ``(word, level, condition)``; it yields per-fiber MR and
    FT NSIM for every profile. Completed cells are cached under a content
    hash of the stimulus file, profiles, level, condition, configs and
    seed. Results do not depend on `jobs`.
    """
    if conditions is None:
        conditions = default_conditions()
    profiles = list(profiles)
    if baseline_id is None:
        baseline_id = profiles[0].id
    if baseline_id not in {p.id for p in profiles}:
        raise ValueError(f"profiles must include the baseline {baseline_id!r}")
    cache = CellCache(cache_dir) if cache_dir is not None else None

    common = {
        "version": CACHE_VERSION,
        "profiles": [p.to_dict() for p in profiles],
        "periphery": periphery.to_dict(),
        "neurogram": neurogram_spec.__dict__,
        "similarity": _sim_dict(similarity),
    }
    digests = {e.word_id: file_digest(e.path) for e in corpus}
    cells, keys = [], []
    for cond in conditions:
        for level in levels:
            for e in corpus:
                cells.append((e.word_id, e.path, float(level), cond, profiles, periphery, neurogram_spec,
                              similarity))
                keys.append(_content_key(dict(common, stimulus=digests[e.word_id], level=float(level),
                                              condition=_condition_dict(cond))))
    results: List[Optional[dict]] = [None] * len(cells)
    todo = []
    for i, key in enumerate(keys):
        hit = cache.get(key) if (cache is not None and use_cache) else None
        if hit is not None:
            results[i] = hit
        else:
            todo.append(i)
    log.info("study2: %d cells, %d cached", len(cells), len(cells) - len(todo))

    computed = _run_tasks(_study2_cell, [cells[i] for i in todo], jobs)
    for i, res in zip(todo, computed):
        results[i] = res
        if cache is not None:
            cache.put(keys[i], res)

    word_records = []
    for cell, res in zip(cells, results):
        word_id, _, level, cond = cell[:4]
        for prof in profiles:
            for f in FIBERS:
                for k in KINDS:
                    word_records.append(StudyRecord(word_id, prof.id, level, cond.name, f, k,
                                                    float(res[prof.id][f"{f}|{k}"])))
    records = mean_records(word_records)
    return Study2Result(records, word_records, cnd_effect_points(records, baseline_id),
                        [p.id for p in profiles], [c.name for c in conditions],
                        n_computed=len(todo), n_cached=len(cells) - len(todo))


# --------------------------------------------------------------------------- study 1


def _study1_cell(task):
    word_id, wave, level, profiles, periph, spec, sim, noise, snr_db = task
    stim = prepare_stimulus(wave, StimulusCondition("clean"), level, noise=noise, snr_db=snr_db)
    return _compare_cell(stim, profiles, periph, spec, sim, ("SUM",), KINDS)


def study1_features(stimuli: Sequence[Tuple[str, Waveform]], profiles: Sequence[HearingProfile],
                    level_db_spl: float = 65.0, periphery: PeripheryConfig = PeripheryConfig(),
                    neurogram_spec: NeurogramSpec = NeurogramSpec(),
                    similarity: SimilarityConfig = SimilarityConfig(),
                    noise: Optional[Waveform] = None, snr_db: Optional[float] = None,
                    scores: Optional[Dict[str, float]] = None, jobs: int = 1) -> List[FeatureRow]:
    """Word-averaged pooled-fiber MR and FT NSIM plus PTA for each profile.

    Scores are joined by profile id when given; profiles without a score get
    ``score=None``.
    """
    stimuli = list(stimuli)
    if not stimuli:
        raise ValueError("no stimuli given")
    if len(stimuli) != 10:
        warnings.warn(f"expected 10 stimuli, got {len(stimuli)}", stacklevel=2)
    for p in profiles:
        if p.cnd != NO_CND:
            raise ValueError(f"profile {p.id}: hearing-loss features assume the full fiber complement")
    tasks = [(wid, w, level_db_spl, list(profiles), periphery, neurogram_spec, similarity, noise, snr_db)
             for wid, w in stimuli]
    per_word = _run_tasks(_study1_cell, tasks, jobs)
    rows = []
    for p in profiles:
        mr = math.fsum(r[p.id]["SUM", "MR"] for r in per_word) / len(per_word)
        ft = math.fsum(r[p.id]["SUM", "FT"] for r in per_word) / len(per_word)
        score = None if scores is None else scores.get(p.id)
        rows.append(FeatureRow(p.id, mr, ft, pta(p.audiogram), score))
    return rows
