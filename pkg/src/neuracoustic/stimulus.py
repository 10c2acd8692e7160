"""Speech material ingestion and stimulus degradation.

Waveforms are plain ``(samples, sample_rate)`` pairs. Degradations
(time compression, reverberation, noise) run on the raw recording; level
calibration to pascals comes last so the presented level is exact.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import signal
from scipy.io import wavfile

__all__ = [
    "P_REF",
    "Waveform",
    "ReverbSpec",
    "StimulusCondition",
    "CorpusEntry",
    "CorpusManifest",
    "load_wav",
    "write_wav",
    "load_manifest",
    "write_manifest",
    "rms",
    "scale_to_spl",
    "resample",
    "make_speech_shaped_noise",
    "mix_at_snr",
    "time_compress",
    "reverb_impulse_response",
    "add_reverb",
    "prepare_stimulus",
    "file_digest",
]

#: reference pressure for dB SPL, pascals
P_REF = 20e-6


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1:
            raise ValueError("waveform samples must be one-dimensional")
        if x.size == 0:
            raise ValueError("zero-length audio")
        if not np.all(np.isfinite(x)):
            raise ValueError("waveform contains non-finite samples")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", x)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class ReverbSpec:
    """Synthetic exponentially decaying room response."""

    rt60_s: float = 0.5
    ir_length_s: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.rt60_s > 0:
            raise ValueError("rt60_s must be positive")
        if self.ir_length_s < self.rt60_s / 2:
            raise ValueError("ir_length_s must be at least rt60_s / 2")


@dataclass(frozen=True)
class StimulusCondition:
    """One listening condition of the sweep.

    ``compression_factor`` is the output/input duration ratio, so 0.65
    keeps 65 % of the original duration.
    """

    name: str = "clean"
    compression_factor: float = 1.0
    reverb: Optional[ReverbSpec] = None

    def __post_init__(self):
        if not 0 < self.compression_factor <= 1:
            raise ValueError("compression_factor must lie in (0, 1]")


@dataclass(frozen=True)
class CorpusEntry:
    word_id: str
    list_id: str
    path: Path


@dataclass
class CorpusManifest:
    entries: list = field(default_factory=list)
    description: str = ""

    def __post_init__(self):
        ids = [e.word_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("corpus word_ids must be unique")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def load_wav(path) -> Waveform:
    """Read a PCM WAV file as a mono waveform.

    16-bit integer samples are divided by 32768; 32-bit float samples are
    taken as is. Channels are averaged.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:  # scipy raises ValueError or struct errors on bad headers
        raise ValueError(f"{path}: corrupt or unreadable WAV header ({exc})") from exc
    if data.dtype == np.int16:
        data = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        data = data.astype(float)
    else:
        raise ValueError(f"{path}: unsupported encoding {data.dtype} (need 16-bit PCM or 32-bit float)")
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.size == 0:
        raise ValueError(f"{path}: zero-length audio")
    return Waveform(data, float(rate))


def write_wav(path, w: Waveform, encoding: str = "float32"):
    """Write `w` as 32-bit float (default) or 16-bit PCM."""
    if encoding == "float32":
        data = w.samples.astype(np.float32)
    elif encoding == "int16":
        data = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    rate = int(round(w.sample_rate))
    wavfile.write(path, rate, data)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def load_manifest(path) -> CorpusManifest:
    """Load a JSON corpus manifest.

    The file holds ``{"description": ..., "entries": [{"word_id", "list_id",
    "path"}, ...]}``; relative paths resolve against the manifest directory.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    base = path.parent
    entries = []
    for item in doc["entries"]:
        p = Path(item["path"])
        if not p.is_absolute():
            p = base / p
        if not p.exists():
            raise FileNotFoundError(f"corpus file missing: {p}")
        entries.append(CorpusEntry(str(item["word_id"]), str(item.get("list_id", "")), p))
    return CorpusManifest(entries, doc.get("description", ""))


def write_manifest(path, manifest: CorpusManifest):
    path = Path(path)
    doc = {
        "description": manifest.description,
        "entries": [
            {
                "word_id": e.word_id,
                "list_id": e.list_id,
                "path": os.path.relpath(e.path, path.parent),
            }
            for e in manifest.entries
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def rms(x) -> float:
    x = np.asarray(getattr(x, "samples", x), dtype=float)
    return math.sqrt(float(np.mean(x * x)))


def scale_to_spl(w: Waveform, level_db_spl: float) -> Waveform:
    """Calibrate `w` to pascals so its RMS is ``20 uPa * 10**(L/20)``."""
    r = rms(w)
    if r == 0:
        raise ValueError("cannot calibrate silent waveform (rms = 0)")
    if not math.isfinite(level_db_spl):
        raise ValueError("level must be finite")
    return Waveform(w.samples / r * P_REF * 10 ** (level_db_spl / 20), w.sample_rate)


def resample(w: Waveform, rate: float) -> Waveform:
    """Polyphase resampling to `rate` Hz."""
    if w.sample_rate == rate:
        return w
    ratio = Fraction(rate / w.sample_rate).limit_denominator(1000)
    y = signal.resample_poly(w.samples, ratio.numerator, ratio.denominator)
    return Waveform(y, float(rate))


def _corpus_signal(corpus: CorpusManifest):
    waves = [load_wav(e.path) for e in corpus]
    fs = waves[0].sample_rate
    return np.concatenate([resample(w, fs).samples for w in waves]), fs


def make_speech_shaped_noise(corpus: CorpusManifest, duration_s: float, seed: int,
                             nperseg: int = 1024) -> Waveform:
    """Gaussian noise with the corpus long-term average spectrum.

    The Welch magnitude spectrum of the concatenated corpus is applied to
    the FFT of white noise; the result has unit RMS.
    """
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    if not duration_s > 0:
        raise ValueError("duration must be positive")
    x, fs = _corpus_signal(corpus)
    freqs, psd = signal.welch(x, fs=fs, nperseg=min(nperseg, x.size))
    n = int(round(duration_s * fs))
    rng = np.random.default_rng(seed)
    spec = np.fft.rfft(rng.standard_normal(n))
    mag = np.interp(np.fft.rfftfreq(n, 1 / fs), freqs, np.sqrt(psd))
    y = np.fft.irfft(spec * mag, n)
    return Waveform(y / rms(y), fs)


def mix_at_snr(sig: Waveform, noise: Waveform, snr_db: float) -> Waveform:
    """Add `noise`, truncated to the signal length, at `snr_db`."""
    if sig.sample_rate != noise.sample_rate:
        raise ValueError("signal and noise sample rates differ")
    if noise.samples.size < sig.samples.size:
        raise ValueError("noise shorter than signal")
    n = noise.samples[: sig.samples.size]
    rs, rn = rms(sig), rms(n)
    if rs == 0 or rn == 0:
        raise ValueError("silent signal or noise")
    g = rs / (rn * 10 ** (snr_db / 20))
    return Waveform(sig.samples + g * n, sig.sample_rate)


def time_compress(w: Waveform, factor: float, frame_s: float = 0.020,
                  tolerance_s: float = 0.005) -> Waveform:
    """Pitch-preserving time compression by waveform-similarity overlap-add.

    Output duration is ``factor`` times the input duration. Frames of
    `frame_s` are overlap-added at a fixed synthesis hop of half a frame;
    the analysis hop is the synthesis hop divided by `factor`, and each
    frame position is refined within +/- `tolerance_s` to best continue the
    previously copied segment.
    """
    if not 0 < factor <= 1:
        raise ValueError("compression factor must lie in (0, 1]")
    if factor == 1:
        return w
    x = w.samples
    fs = w.sample_rate
    frame = int(round(frame_s * fs))
    if x.size < frame:
        raise ValueError("input shorter than one analysis frame")
    hs = frame // 2
    ha = hs / factor
    tol = int(round(tolerance_s * fs))
    win = signal.windows.hann(frame, sym=False)

    out_len = int(round(factor * x.size))
    n_frames = int(math.ceil(out_len / hs)) + 1
    pad = np.concatenate([np.zeros(tol), x, np.zeros(frame + tol + int(ha) + hs)])
    y = np.zeros(n_frames * hs + frame)
    norm = np.zeros_like(y)

    prev = 0  # position in `pad` coordinates of the last copied frame, minus tol
    for k in range(n_frames):
        nominal = int(round(k * ha))
        if k == 0:
            pos = nominal
        else:
            natural = pad[tol + prev + hs : tol + prev + hs + frame]
            lo = max(nominal - tol, -tol)
            region = pad[tol + lo : tol + nominal + tol + frame]
            xc = signal.correlate(region, natural, mode="valid", method="fft")
            pos = lo + int(np.argmax(xc))
        seg = pad[tol + pos : tol + pos + frame]
        y[k * hs : k * hs + frame] += win * seg
        norm[k * hs : k * hs + frame] += win
        prev = pos
    y = y[:out_len]
    norm = norm[:out_len]
    y = np.where(norm > 1e-8, y / np.maximum(norm, 1e-8), 0.0)
    return Waveform(y, fs)


def reverb_impulse_response(spec: ReverbSpec, sample_rate: float) -> np.ndarray:
    """Seeded noise with a 60 dB-per-rt60 exponential decay, unit energy."""
    n = max(int(round(spec.ir_length_s * sample_rate)), 1)
    t = np.arange(n) / sample_rate
    rng = np.random.default_rng(spec.seed)
    ir = rng.standard_normal(n) * np.exp(-t * 3 * math.log(10) / spec.rt60_s)
    return ir / math.sqrt(float(np.sum(ir * ir)))


def add_reverb(w: Waveform, spec: ReverbSpec) -> Waveform:
    """Convolve with the synthetic room response (full-length output)."""
    ir = reverb_impulse_response(spec, w.sample_rate)
    return Waveform(signal.fftconvolve(w.samples, ir, mode="full"), w.sample_rate)


def prepare_stimulus(w: Waveform, condition: StimulusCondition, level_db_spl: float,
                     rate: Optional[float] = None, noise: Optional[Waveform] = None,
                     snr_db: Optional[float] = None) -> Waveform:
    """Degrade, optionally add noise, calibrate and resample one recording."""
    x = time_compress(w, condition.compression_factor)
    if condition.reverb is not None:
        x = add_reverb(x, condition.reverb)
    if snr_db is not None:
        if noise is None:
            raise ValueError("snr_db given without a noise waveform")
        x = mix_at_snr(x, resample(noise, x.sample_rate), snr_db)
    x = scale_to_spl(x, level_db_spl)
    return resample(x, rate) if rate else x
