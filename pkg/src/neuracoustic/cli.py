"""Command-line entry point: ``neuracoustic <subcommand>``.

Exit codes: 0 success, 1 internal failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
import tomli_w

from . import __version__
from .config import RunConfig, cache_dir_for, load_config
from .neurogram import neurograms_from_bank, read_neurogram, write_neurogram, write_neurogram_csv
from .oracle import direct_ssim_map
from .periphery import SLOPING_LOSS, Audiogram, CNDProfile, simulate_fiber_bank
from .regression import FEATURES, grid_search, read_scores_csv, save_model, table3_grid, train_svr, write_feature_csv
from .report import emit_report, write_records_csv
from .similarity import SimilarityConfig, nsim, ssi
from .stimulus import file_digest, load_manifest, load_wav, make_speech_shaped_noise, prepare_stimulus
from .studies import CellError, HearingProfile, study1_features, study2_sweep, table2_profiles

log = logging.getLogger("neuracoustic")

EXIT_OK, EXIT_INTERNAL, EXIT_BAD_INPUT = 0, 1, 2

#: feature sets evaluated by ``study1``, mirroring the reported model table
STUDY1_FEATURE_SETS = {
    "mr": ("mr_nsim",),
    "ft": ("ft_nsim",),
    "mr_ft": ("mr_nsim", "ft_nsim"),
    "mr_ft_pta": ("mr_nsim", "ft_nsim", "pta_db"),
}


class BadInput(Exception):
    pass


def _config(args) -> RunConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = RunConfig.from_dict(dict(cfg.to_dict(), seed=args.seed, cache_dir=cfg.cache_dir))
    return cfg


def _sha(path) -> str:
    return file_digest(path)


def _write_manifest(out: Path, cfg: RunConfig, inputs: dict, command: str):
    doc = {
        "command": command,
        "version": __version__,
        "config": cfg.to_dict(),
        "inputs": {k: {"path": str(p), "sha256": _sha(p)} for k, p in sorted(inputs.items())},
    }
    doc["config_hash"] = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()
    with open(out / "run_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_profile(spec: str, cnd: str = None) -> HearingProfile:
    counts = CNDProfile(*(int(x) for x in cnd.split(","))) if cnd else CNDProfile()
    if spec.startswith("flat:"):
        level = float(spec.split(":", 1)[1])
        return HearingProfile(f"flat{level:g}", Audiogram.flat(level), counts)
    if spec == "sloping":
        return HearingProfile("sloping", SLOPING_LOSS, counts)
    path = Path(spec)
    if not path.exists():
        raise BadInput(f"profile {spec!r}: expected flat:<dB>, sloping, or a JSON file")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    prof = HearingProfile.from_dict(doc)
    return HearingProfile(prof.id, prof.audiogram, counts) if cnd else prof


def read_profiles(path) -> list:
    """Hearing profiles from JSON (list of profile objects) or CSV.

    The CSV form has a ``profile_id`` column followed by one column per
    audiometric frequency in Hz.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        with open(path, encoding="utf-8") as fh:
            return [HearingProfile.from_dict(d) for d in json.load(fh)]
    profiles = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        freq_cols = [c for c in reader.fieldnames if c != "profile_id"]
        freqs = [float(c) for c in freq_cols]
        for rec in reader:
            aud = Audiogram(tuple((f, float(rec[c])) for f, c in zip(freqs, freq_cols)))
            profiles.append(HearingProfile(rec["profile_id"], aud))
    return profiles


# --------------------------------------------------------------------------- commands


def cmd_defaults(args):
    doc = RunConfig().to_dict()
    if args.format == "json":
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    else:
        sys.stdout.write(tomli_w.dumps({k: v for k, v in doc.items() if v is not None}))
    return EXIT_OK


def cmd_neurogram(args):
    cfg = _config(args)
    wave = load_wav(args.wav)
    prof = _parse_profile(args.profile, args.cnd)
    cond = next((c for c in cfg.conditions if c.name == args.condition), None)
    if cond is None:
        raise BadInput(f"unknown condition {args.condition!r}")
    stim = prepare_stimulus(wave, cond, args.level)
    bank = simulate_fiber_bank(stim, prof.audiogram, prof.cnd, cfg.periphery)
    meta = {"stimulus": Path(args.wav).name, "level_db_spl": args.level, "condition": cond.name,
            "profile_id": prof.id, "seed": cfg.seed}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.wav).stem
    for (tag, kind), n in neurograms_from_bank(bank, cfg.neurogram, metadata=meta).items():
        write_neurogram(n, out / f"{stem}_{tag}_{kind}.ngram")
        if args.csv:
            write_neurogram_csv(n, out / f"{stem}_{tag}_{kind}.csv")
    _write_manifest(out, cfg, {"wav": args.wav}, "neurogram")
    return EXIT_OK


def cmd_nsim(args):
    ref, deg = read_neurogram(args.reference), read_neurogram(args.degraded)
    l_mode = args.l_mode
    if l_mode not in ("reference_max", "pair_max"):
        l_mode = float(l_mode)
    sim = SimilarityConfig(constants=args.constants, l_mode=l_mode)
    res = nsim(ref, deg, sim)
    print(f"nsim={res.nsim:.6f}")
    if args.map_csv:
        np.savetxt(args.map_csv, res.nsi_map, delimiter=",", fmt="%.17g")
    return EXIT_OK


def cmd_study1(args):
    cfg = _config(args)
    corpus = load_manifest(args.corpus)
    profiles = read_profiles(args.profiles)
    stimuli = [(e.word_id, load_wav(e.path)) for e in corpus]
    noise = None
    if cfg.snr_db is not None:
        longest = max(w.duration for _, w in stimuli)
        noise = make_speech_shaped_noise(corpus, longest + 0.1, cfg.noise_seed)
    scores = read_scores_csv(args.scores) if args.scores else None
    rows = study1_features(stimuli, profiles, cfg.study1_level, cfg.periphery, cfg.neurogram,
                           cfg.similarity, noise, cfg.snr_db, scores, jobs=args.jobs or cfg.jobs)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_feature_csv(out / "study1_features.csv", rows)
    inputs = {"corpus": args.corpus, "profiles": args.profiles}
    if scores is None:
        print("no scores given: features written, regression skipped")
    else:
        inputs["scores"] = args.scores
        scored = [r for r in rows if r.score is not None]
        if len(scored) < cfg.cv_folds:
            raise BadInput(f"only {len(scored)} profiles have scores; need at least {cfg.cv_folds}")
        grid = table3_grid()
        report = {}
        best_full = None
        for name, feats in STUDY1_FEATURE_SETS.items():
            hp, rep = grid_search(scored, feats, grid, cfg.cv_folds, cfg.seed, cfg.feature_mode)
            report[name] = {"features": list(feats), "hyperparams": hp.to_dict(), **rep.to_dict()}
            if feats == FEATURES:
                best_full = hp
            print(f"{name:10s} mse={rep.mse:.4f} r2={rep.r2:.3f} {hp.to_dict()}")
        with open(out / "study1_cv_report.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        save_model(train_svr(scored, FEATURES, best_full, cfg.feature_mode), out / "study1_model.json")
    _write_manifest(out, cfg, inputs, "study1")
    return EXIT_OK


def cmd_study2(args):
    cfg = _config(args)
    corpus = load_manifest(args.corpus)
    profiles = read_profiles(args.profiles) if args.profiles else table2_profiles()
    res = study2_sweep(corpus, profiles, cfg.levels, cfg.conditions, cfg.periphery, cfg.neurogram,
                       cfg.similarity, jobs=args.jobs or cfg.jobs, cache_dir=cache_dir_for(cfg),
                       use_cache=args.resume)
    out = Path(args.out or cfg.output_dir)
    emit_report(res.records, out, res.profile_order, res.condition_order)
    write_records_csv(out / "study2_word_records.csv", res.word_records, res.profile_order, res.condition_order)
    inputs = {"corpus": args.corpus}
    inputs.update({f"word:{e.word_id}": e.path for e in corpus})
    if args.profiles:
        inputs["profiles"] = args.profiles
    _write_manifest(out, cfg, inputs, "study2")
    print(f"{len(res.records)} records ({res.n_computed} cells computed, {res.n_cached} from cache)")
    return EXIT_OK


def cmd_ssim_check(args):
    rng = np.random.default_rng(args.seed)
    sim = SimilarityConfig(constants="standard")
    worst = 0.0
    for _ in range(args.n):
        n, m = rng.integers(3, 33), rng.integers(3, 65)
        r = rng.random((n, m)) * 10
        d = np.clip(r + rng.normal(0, 2, (n, m)), 0, None)
        got, _ = ssi(r, d, sim)
        want = direct_ssim_map(r, d, float(r.max()))
        worst = max(worst, float(np.max(np.abs(got - want))))
    ok = worst <= args.tolerance
    print(f"ssim-check: {args.n} pairs, max |diff| = {worst:.3e} ({'PASS' if ok else 'FAIL'})")
    return EXIT_OK if ok else EXIT_INTERNAL


# --------------------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="neuracoustic", description="Neurogram similarity simulations")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("defaults", help="print the default run configuration")
    s.add_argument("--format", choices=("toml", "json"), default="toml")
    s.set_defaults(func=cmd_defaults)

    s = sub.add_parser("neurogram", help="simulate MR and FT neurograms for one recording")
    s.add_argument("wav")
    s.add_argument("--profile", default="flat:0", help="flat:<dB>, sloping, or profile JSON")
    s.add_argument("--cnd", help="surviving LS,MS,HS fibers, e.g. 5,5,12")
    s.add_argument("--level", type=float, default=65.0)
    s.add_argument("--condition", default="clean")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--csv", action="store_true", help="also write CSV exports")
    s.set_defaults(func=cmd_neurogram)

    s = sub.add_parser("nsim", help="NSIM between two neurogram files")
    s.add_argument("reference")
    s.add_argument("degraded")
    s.add_argument("--constants", choices=("paper", "standard"), default="paper")
    s.add_argument("--l-mode", default="reference_max", help="reference_max, pair_max or a number")
    s.add_argument("--map-csv")
    s.set_defaults(func=cmd_nsim)

    s = sub.add_parser("study1", help="hearing-loss features and regression")
    s.add_argument("--corpus", required=True)
    s.add_argument("--profiles", required=True, help="CSV (profile_id + frequency columns) or JSON")
    s.add_argument("--scores", help="CSV profile_id,score")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--jobs", type=int)
    s.set_defaults(func=cmd_study1)

    s = sub.add_parser("study2", help="CND sweep")
    s.add_argument("--corpus", required=True)
    s.add_argument("--profiles", help="JSON profile list (default: sloping loss x seven CND profiles)")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--jobs", type=int)
    s.add_argument("--resume", action="store_true", help="reuse completed cells from the cache")
    s.set_defaults(func=cmd_study2)

    s = sub.add_parser("ssim-check", help="cross-check the windowed SSIM against a direct loop")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tolerance", type=float, default=1e-12)
    s.set_defaults(func=cmd_ssim_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        cause = exc.__cause__
        return EXIT_BAD_INPUT if isinstance(cause, (ValueError, OSError)) else EXIT_INTERNAL
    except (BadInput, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except Exception as exc:  # anything else is our bug
        log.exception("internal failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
