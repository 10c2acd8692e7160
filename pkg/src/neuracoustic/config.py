"""Run configuration: TOML or JSON in, fully resolved dictionary out.

Unknown keys are rejected so typos fail loudly. A config must carry an
explicit ``seed``; nothing is ever seeded from the clock.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional

import tomli

from .neurogram import NeurogramSpec
from .periphery import PeripheryConfig
from .similarity import SimilarityConfig
from .stimulus import ReverbSpec, StimulusCondition
from .studies import default_conditions

__all__ = ["RunConfig", "load_config", "cache_dir_for"]

CACHE_ENV = "NEURACOUSTIC_CACHE_DIR"


@dataclass
class RunConfig:
    seed: int = 0
    periphery: PeripheryConfig = field(default_factory=PeripheryConfig)
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    neurogram: NeurogramSpec = field(default_factory=NeurogramSpec)
    levels: List[float] = field(default_factory=lambda: [50.0, 65.0, 80.0, 95.0])
    conditions: List[StimulusCondition] = field(default_factory=default_conditions)
    study1_level: float = 65.0
    snr_db: Optional[float] = None
    noise_seed: int = 0
    feature_mode: str = "set"
    cv_folds: int = 3
    output_dir: str = "results"
    cache_dir: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        self.periphery = replace(self.periphery, seed=int(self.seed))
        if self.neurogram.ft_bin_s != self.periphery.ft_bin_s:
            raise ValueError("neurogram ft_bin_s must equal the periphery ft_bin_s")
        if not self.levels:
            raise ValueError("at least one level required")
        if self.feature_mode not in ("set", "product"):
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")

    def to_dict(self) -> dict:
        sim = self.similarity
        periph = self.periphery.to_dict()
        periph.pop("seed")
        return {
            "seed": self.seed,
            "periphery": periph,
            "similarity": {"constants": sim.constants, "l_mode": sim.l_mode},
            "neurogram": dict(self.neurogram.__dict__),
            "levels": list(self.levels),
            "conditions": [
                {"name": c.name, "compression_factor": c.compression_factor,
                 **({} if c.reverb is None else {"reverb": dict(c.reverb.__dict__)})}
                for c in self.conditions
            ],
            "study1_level": self.study1_level,
            "snr_db": self.snr_db,
            "noise_seed": self.noise_seed,
            "feature_mode": self.feature_mode,
            "cv_folds": self.cv_folds,
            "output_dir": self.output_dir,
            "cache_dir": self.cache_dir,
            "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, d: dict, require_seed: bool = True) -> "RunConfig":
        d = dict(d)
        if require_seed and "seed" not in d:
            raise ValueError("config must set an explicit integer 'seed'")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        if "periphery" in d:
            kw["periphery"] = PeripheryConfig.from_dict(d.pop("periphery"))
        if "similarity" in d:
            s = d.pop("similarity")
            kw["similarity"] = SimilarityConfig(constants=s.get("constants", "paper"),
                                                l_mode=s.get("l_mode", "reference_max"))
        if "neurogram" in d:
            kw["neurogram"] = NeurogramSpec(**d.pop("neurogram"))
        if "conditions" in d:
            conds = []
            for c in d.pop("conditions"):
                rv = c.get("reverb")
                conds.append(StimulusCondition(c["name"], c.get("compression_factor", 1.0),
                                               ReverbSpec(**rv) if rv else None))
            kw["conditions"] = conds
        if "levels" in d:
            kw["levels"] = [float(x) for x in d.pop("levels")]
        kw.update(d)
        return cls(**kw)


def load_config(path) -> RunConfig:
    """Read a ``.toml`` or ``.json`` run configuration."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    return RunConfig.from_dict(doc)


def cache_dir_for(config: RunConfig) -> Path:
    """Cache location: environment override, then config, then under the output directory."""
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    if config.cache_dir:
        return Path(config.cache_dir)
    return Path(config.output_dir) / "cache"
