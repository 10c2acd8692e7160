import json

import numpy as np
import pytest
import tomli

from neuracoustic.cli import main, read_profiles
from neuracoustic.config import RunConfig, cache_dir_for, load_config
from neuracoustic.neurogram import Neurogram, read_neurogram, write_neurogram

# mean NSI of the fixture pair below, from the brute-force oracle in tests/oracles.py
GOLDEN_NSIM = -0.1601816201666567

SMALL_TOML = """
seed = 3
levels = [65.0]
conditions = [{name = "clean", compression_factor = 1.0}]
cv_folds = 3

[periphery]
n_cf = 6
n_reps = 5
internal_rate_hz = 40000.0
cf_max_hz = 6000.0
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL_TOML)
    return p


def fixture_pair(tmp_path):
    r = np.array([[(i * 7 + j * 3) % 11 + 1.0 for j in range(6)] for i in range(5)])
    d = np.array([[(i * 5 + j * 2) % 13 + 0.5 for j in range(6)] for i in range(5)])
    cfs = [250.0, 500.0, 1000.0, 2000.0, 4000.0]
    write_neurogram(Neurogram(r, cfs, 6.4e-3, "MR", "SUM"), tmp_path / "r.ngram")
    write_neurogram(Neurogram(d, cfs, 6.4e-3, "MR", "SUM"), tmp_path / "d.ngram")
    return tmp_path / "r.ngram", tmp_path / "d.ngram"


def test_defaults_roundtrip(capsys, tmp_path):
    assert main(["defaults"]) == 0
    text = capsys.readouterr().out
    doc = tomli.loads(text)
    assert doc["seed"] == 0 and doc["periphery"]["n_cf"] == 40
    (tmp_path / "d.toml").write_text(text)
    assert load_config(tmp_path / "d.toml").to_dict() == RunConfig().to_dict()
    assert main(["defaults", "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["levels"] == [50.0, 65.0, 80.0, 95.0]


def test_config_rules(tmp_path, monkeypatch):
    with pytest.raises(ValueError, match="seed"):
        RunConfig.from_dict({"levels": [65.0]})
    with pytest.raises(ValueError, match="unknown"):
        RunConfig.from_dict({"seed": 1, "bogus": 2})
    cfg = RunConfig.from_dict({"seed": 5, "output_dir": str(tmp_path)})
    assert cfg.periphery.seed == 5
    assert cache_dir_for(cfg) == tmp_path / "cache"
    monkeypatch.setenv("NEURACOUSTIC_CACHE_DIR", str(tmp_path / "env"))
    assert cache_dir_for(cfg) == tmp_path / "env"


def test_neurogram_command(tiny_corpus_path, small_cfg, tmp_path):
    wav = tiny_corpus_path.parent / "w000.wav"
    args = ["neurogram", str(wav), "--config", str(small_cfg), "--profile", "flat:0"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    files = sorted(p.name for p in (tmp_path / "a").glob("*.ngram"))
    assert len(files) == 8 and "w000_SUM_MR.ngram" in files
    assert (tmp_path / "a" / "run_manifest.json").exists()
    assert main(args + ["--out", str(tmp_path / "b"), "--csv"]) == 0
    for name in files + ["run_manifest.json"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len(list((tmp_path / "b").glob("*.csv"))) == 8
    ng = read_neurogram(tmp_path / "a" / "w000_HS_FT.ngram")
    assert ng.metadata["seed"] == 3 and ng.values.shape[0] == 6


def test_neurogram_bad_wav(tmp_path, capsys):
    bad = tmp_path / "broken.wav"
    bad.write_bytes(b"not a wav")
    assert main(["neurogram", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "broken.wav" in capsys.readouterr().err


def test_nsim_command(tmp_path, capsys):
    r, d = fixture_pair(tmp_path)
    assert main(["nsim", str(r), str(r)]) == 0
    assert capsys.readouterr().out.strip() == "nsim=1.000000"
    assert main(["nsim", str(r), str(d), "--map-csv", str(tmp_path / "m.csv")]) == 0
    assert capsys.readouterr().out.strip() == f"nsim={GOLDEN_NSIM:.6f}"
    m = np.loadtxt(tmp_path / "m.csv", delimiter=",")
    assert m.shape == (3, 4)
    assert m.mean() == pytest.approx(GOLDEN_NSIM, abs=1e-9)


def test_nsim_too_small(tmp_path, capsys):
    n = Neurogram(np.ones((2, 2)), [1.0, 2.0], 1e-4, "FT", "SUM")
    write_neurogram(n, tmp_path / "s.ngram")
    assert main(["nsim", str(tmp_path / "s.ngram"), str(tmp_path / "s.ngram")]) == 2
    assert "too small" in capsys.readouterr().err


def test_ssim_check(capsys):
    assert main(["ssim-check", "--n", "5"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_read_profiles(tmp_path):
    (tmp_path / "p.csv").write_text("profile_id,250,500,1000,2000,4000,8000\na,0,0,10,20,30,40\n")
    ps = read_profiles(tmp_path / "p.csv")
    assert ps[0].id == "a" and ps[0].audiogram.threshold_at(2000.0) == 20.0
    (tmp_path / "p.json").write_text(json.dumps([p.to_dict() for p in ps]))
    assert read_profiles(tmp_path / "p.json") == ps


@pytest.mark.filterwarnings("ignore:expected 10 stimuli")
def test_study1_without_scores(tiny_corpus_path, small_cfg, tmp_path, capsys):
    (tmp_path / "p.csv").write_text("profile_id,250,8000\nnh,0,0\nf30,30,30\n")
    out = tmp_path / "o"
    rc = main(["study1", "--corpus", str(tiny_corpus_path), "--profiles", str(tmp_path / "p.csv"),
               "--config", str(small_cfg), "--out", str(out)])
    assert rc == 0
    assert "regression skipped" in capsys.readouterr().out
    lines = (out / "study1_features.csv").read_text().splitlines()
    assert lines[0] == "profile_id,mr_nsim,ft_nsim,pta_db,score" and len(lines) == 3
    assert not (out / "study1_model.json").exists()


@pytest.mark.filterwarnings("ignore:expected 10 stimuli")
def test_study1_with_scores(tiny_corpus_path, small_cfg, tmp_path):
    levels = [0, 10, 20, 30, 40, 50]
    (tmp_path / "p.csv").write_text("profile_id,250,8000\n" + "".join(f"f{l},{l},{l}\n" for l in levels))
    (tmp_path / "s.csv").write_text("profile_id,score\n" + "".join(f"f{l},{1 - l / 60:.3f}\n" for l in levels))
    out = tmp_path / "o"
    rc = main(["study1", "--corpus", str(tiny_corpus_path), "--profiles", str(tmp_path / "p.csv"),
               "--scores", str(tmp_path / "s.csv"), "--config", str(small_cfg), "--out", str(out)])
    assert rc == 0
    rep = json.loads((out / "study1_cv_report.json").read_text())
    assert set(rep) == {"mr", "ft", "mr_ft", "mr_ft_pta"}
    assert json.loads((out / "study1_model.json").read_text())["fmt"] == "svr-model/1"


def test_study2_resume(tiny_corpus_path, small_cfg, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("NEURACOUSTIC_CACHE_DIR", str(tmp_path / "cache"))
    base = ["study2", "--corpus", str(tiny_corpus_path), "--config", str(small_cfg)]
    assert main(base + ["--out", str(tmp_path / "a")]) == 0
    assert "2 cells computed" in capsys.readouterr().out
    # simulate an interrupted run: drop one cached cell, then resume
    cells = sorted((tmp_path / "cache").glob("*.json"))
    assert len(cells) == 2
    cells[0].unlink()
    assert main(base + ["--out", str(tmp_path / "b"), "--resume"]) == 0
    assert "1 cells computed, 1 from cache" in capsys.readouterr().out
    for name in ("study2_records.csv", "cnd_effect.csv", "cnd_effect_clean.svg", "study2_word_records.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    n_rows = len((tmp_path / "a" / "study2_records.csv").read_text().splitlines()) - 1
    assert n_rows == 7 * 1 * 1 * 3 * 2


def test_study2_missing_corpus(tmp_path):
    assert main(["study2", "--corpus", str(tmp_path / "none.json")]) == 2
