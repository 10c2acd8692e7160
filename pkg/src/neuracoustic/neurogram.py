"""Mean-rate and fine-timing neurograms and their file format.

A neurogram stacks one smoothed PSTH per CF (rows ascending in CF).
Fine-timing (FT) neurograms keep 100 us bins smoothed by a 32-bin Hamming
window; mean-rate (MR) neurograms use 6.4 ms bins and a 16-bin window.
Smoothing is a unit-DC-gain convolution over fully overlapping positions
only, so bin width is unchanged and edges are never zero-padded.

File format ``neurogram/1``: one UTF-8 JSON header line, then the values
as little-endian float64, row-major.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
from scipy import signal

from .periphery import PSTH, FiberType

__all__ = [
    "FORMAT_VERSION",
    "NeurogramSpec",
    "Neurogram",
    "rebin",
    "smoothing_window",
    "build_neurogram",
    "sum_fiber_types",
    "neurograms_from_bank",
    "intensity_range",
    "write_neurogram",
    "read_neurogram",
    "write_neurogram_csv",
]

FORMAT_VERSION = "neurogram/1"
KINDS = ("MR", "FT")
FIBER_TAGS = ("LS", "MS", "HS", "SUM")


@dataclass(frozen=True)
class NeurogramSpec:
    """Bin width and smoothing length for each neurogram kind."""

    ft_bin_s: float = 1e-4
    ft_window: int = 32
    mr_bin_s: float = 6.4e-3
    mr_window: int = 16

    def bin_width(self, kind: str) -> float:
        return self.ft_bin_s if kind == "FT" else self.mr_bin_s

    def window(self, kind: str) -> int:
        return self.ft_window if kind == "FT" else self.mr_window


@dataclass
class Neurogram:
    values: np.ndarray
    cf_axis_hz: np.ndarray
    bin_width_s: float
    kind: str
    fiber_type: str
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        cf = np.asarray(self.cf_axis_hz, dtype=float)
        if v.ndim != 2:
            raise ValueError("neurogram values must be a 2-D matrix")
        if v.shape[0] != cf.size:
            raise ValueError(f"{v.shape[0]} rows but {cf.size} CFs")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("neurogram values must be finite and non-negative")
        if self.kind not in KINDS:
            raise ValueError(f"unknown neurogram kind {self.kind!r}")
        if self.fiber_type not in FIBER_TAGS:
            raise ValueError(f"unknown fiber type {self.fiber_type!r}")
        if not self.bin_width_s > 0:
            raise ValueError("bin width must be positive")
        self.values, self.cf_axis_hz = v, cf

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, Neurogram):
            return NotImplemented
        return (
            self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.cf_axis_hz, other.cf_axis_hz)
            and self.bin_width_s == other.bin_width_s
            and self.kind == other.kind
            and self.fiber_type == other.fiber_type
            and self.metadata == other.metadata
        )


def rebin(psth: PSTH, target_bin_s: float) -> PSTH:
    """Sum counts over consecutive groups of bins; drop a trailing partial group.

    >>> rebin(PSTH(np.array([1, 2, 3, 4]), 1.0, 0.0, "HS"), 2.0).counts.tolist()
    [3, 7]
    """
    ratio = target_bin_s / psth.bin_width_s
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(ratio, 1.0):
        raise ValueError(f"target bin {target_bin_s} is not an integer multiple of {psth.bin_width_s}")
    c = psth.counts
    m = c.size // n
    out = c[: m * n].reshape(m, n).sum(axis=1)
    return PSTH(out, target_bin_s if n > 1 else psth.bin_width_s, psth.cf_hz, psth.fiber_type,
                absent=psth.absent, truncated=psth.truncated or (c.size % n != 0))


def smoothing_window(length: int) -> np.ndarray:
    w = signal.windows.hamming(length, sym=True)
    return w / w.sum()


def _smooth_rows(x: np.ndarray, length: int) -> np.ndarray:
    if x.shape[1] < length:
        raise ValueError(f"only {x.shape[1]} bins, need at least {length} for smoothing")
    return signal.convolve2d(x, smoothing_window(length)[None, :], mode="valid")


def build_neurogram(psths: Sequence[PSTH], kind: str, spec: NeurogramSpec = NeurogramSpec(),
                    metadata=None) -> Neurogram:
    """Stack PSTHs (one per CF) into a smoothed MR or FT neurogram."""
    if kind not in KINDS:
        raise ValueError(f"unknown neurogram kind {kind!r}")
    if not psths:
        raise ValueError("no PSTHs given")
    widths = {p.bin_width_s for p in psths}
    tags = {p.fiber_type for p in psths}
    lengths = {p.counts.size for p in psths}
    if len(widths) != 1 or len(tags) != 1 or len(lengths) != 1:
        raise ValueError("PSTHs must share bin width, fiber type and length")
    order = sorted(range(len(psths)), key=lambda i: psths[i].cf_hz)
    rows = [rebin(psths[i], spec.bin_width(kind)).counts for i in order]
    values = _smooth_rows(np.asarray(rows, dtype=float), spec.window(kind))
    return Neurogram(values, [psths[i].cf_hz for i in order], spec.bin_width(kind), kind,
                     psths[0].fiber_type, dict(metadata or {}))


def sum_fiber_types(bank: Dict[FiberType, List[PSTH]]) -> List[PSTH]:
    """Per-CF PSTHs of all fiber types pooled, tagged ``SUM``."""
    per_type = [bank[ft] for ft in FiberType]
    out = []
    for group in zip(*per_type):
        counts = np.sum([p.counts for p in group], axis=0)
        out.append(PSTH(counts, group[0].bin_width_s, group[0].cf_hz, "SUM"))
    return out


def neurograms_from_bank(bank: Dict[FiberType, List[PSTH]], spec: NeurogramSpec = NeurogramSpec(),
                         fibers=FIBER_TAGS, kinds=KINDS, metadata=None) -> Dict:
    """MR/FT neurograms keyed by ``(fiber_tag, kind)``."""
    out = {}
    for tag in fibers:
        psths = sum_fiber_types(bank) if tag == "SUM" else bank[FiberType(tag)]
        for kind in kinds:
            md = dict(metadata or {})
            out[tag, kind] = build_neurogram(psths, kind, spec, md)
    return out


def intensity_range(reference: Neurogram) -> float:
    """Intensity range L bound to the reference neurogram: its maximum."""
    v = np.asarray(getattr(reference, "values", reference), dtype=float)
    L = float(v.max()) if v.size else 0.0
    if not L > 0:
        raise ValueError("all-zero reference neurogram: intensity range undefined")
    return L


def write_neurogram(n: Neurogram, path):
    header = {
        "fmt": FORMAT_VERSION,
        "n_cf": int(n.values.shape[0]),
        "n_time": int(n.values.shape[1]),
        "cf_axis_hz": [float(c) for c in n.cf_axis_hz],
        "bin_width_s": float(n.bin_width_s),
        "kind": n.kind,
        "fiber_type": n.fiber_type,
        "metadata": n.metadata,
    }
    line = json.dumps(header, sort_keys=True, ensure_ascii=False)
    with open(path, "wb") as fh:
        fh.write(line.encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(n.values, dtype="<f8").tobytes())


def read_neurogram(path) -> Neurogram:
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ValueError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: malformed header ({exc})") from exc
    if header.get("fmt") != FORMAT_VERSION:
        raise ValueError(f"{path}: unknown format version {header.get('fmt')!r}")
    rows, cols = int(header["n_cf"]), int(header["n_time"])
    payload = raw[nl + 1 :]
    need = rows * cols * 8
    if len(payload) < need:
        raise ValueError(f"{path}: payload shorter than header promises ({len(payload)} < {need} bytes)")
    if len(payload) > need:
        raise ValueError(f"{path}: payload longer than header promises ({len(payload)} > {need} bytes)")
    values = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(float)
    return Neurogram(values, header["cf_axis_hz"], header["bin_width_s"], header["kind"],
                     header["fiber_type"], header.get("metadata", {}))


def write_neurogram_csv(n: Neurogram, path):
    """One row per CF; the header row carries the time axis in seconds."""
    t = np.arange(n.values.shape[1]) * n.bin_width_s
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("cf_hz," + ",".join(repr(float(x)) for x in t) + "\n")
        for cf, row in zip(n.cf_axis_hz, n.values):
            fh.write(repr(float(cf)) + "," + ",".join(repr(float(x)) for x in row) + "\n")
