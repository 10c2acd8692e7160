"""Synthetic CVC-like tokens for smoke tests, demos and desk-scale sweeps.

Each token is a noise-burst onset consonant, a formant-filtered harmonic
vowel with a slight pitch glide, and a noise-burst coda. They are not
speech; they give the periphery broadband, time-varying input with
speech-like level structure.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import signal

from .stimulus import CorpusEntry, CorpusManifest, Waveform, write_manifest, write_wav

__all__ = ["synth_cvc", "write_desk_corpus"]

# (F1, F2, F3) for a handful of vowels
_VOWELS = [(730, 1090, 2440), (270, 2290, 3010), (530, 1840, 2480), (660, 1720, 2410),
           (300, 870, 2240), (570, 840, 2410), (440, 1020, 2240), (490, 1350, 1690)]
# (band low, band high) for fricative/plosive noise
_CONSONANTS = [(2500, 6000), (4000, 8000), (1500, 3500), (300, 1500), (3000, 7000), (800, 2500)]


def _noise_burst(rng, n, band, fs):
    sos = signal.butter(4, band, btype="bandpass", fs=fs, output="sos")
    x = signal.sosfilt(sos, rng.standard_normal(n))
    env = np.hanning(n)
    return x * env / (np.sqrt(np.mean(x**2)) + 1e-12)


def _vowel(rng, n, formants, f0, fs):
    t = np.arange(n) / fs
    f0_track = f0 * (1 + 0.08 * np.linspace(0.5, -0.5, n))
    phase = 2 * np.pi * np.cumsum(f0_track) / fs
    src = sum(np.cos(k * phase) / k for k in range(1, int(4000 / f0)))
    y = np.zeros(n)
    for i, fc in enumerate(formants):
        bw = 60 + 40 * i
        b, a = signal.iirpeak(fc, fc / bw, fs=fs)
        y += signal.lfilter(b, a, src) / (i + 1)
    ramp = np.minimum(1, np.minimum(t, t[-1] - t) / 0.02)
    return y * ramp / np.sqrt(np.mean(y**2))


def synth_cvc(index: int, sample_rate: float = 20_000.0, seed: int = 0) -> Waveform:
    """Deterministic CVC-like token number `index`."""
    rng = np.random.default_rng([seed, index])
    fs = sample_rate
    c1 = _CONSONANTS[index % len(_CONSONANTS)]
    c2 = _CONSONANTS[(3 * index + 1) % len(_CONSONANTS)]
    v = _VOWELS[index % len(_VOWELS)]
    f0 = 100 + 10 * (index % 5)
    parts = [
        np.zeros(int(0.02 * fs)),
        0.4 * _noise_burst(rng, int(0.07 * fs), c1, fs),
        _vowel(rng, int(0.22 * fs), v, f0, fs),
        0.3 * _noise_burst(rng, int(0.08 * fs), c2, fs),
        np.zeros(int(0.03 * fs)),
    ]
    x = np.concatenate(parts)
    return Waveform(0.1 * x / np.max(np.abs(x)), fs)


def write_desk_corpus(out_dir, n_words: int = 10, n_lists: int = 1, sample_rate: float = 20_000.0,
                      seed: int = 0, encoding: str = "int16") -> Path:
    """Write `n_words` x `n_lists` tokens plus ``manifest.json``; return the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for li in range(n_lists):
        for wi in range(n_words):
            idx = li * n_words + wi
            path = out_dir / f"w{idx:03d}.wav"
            write_wav(path, synth_cvc(idx, sample_rate, seed), encoding)
            entries.append(CorpusEntry(f"w{idx:03d}", f"L{li:02d}", path))
    manifest = out_dir / "manifest.json"
    write_manifest(manifest, CorpusManifest(entries, f"{n_words * n_lists} synthetic CVC tokens"))
    return manifest
