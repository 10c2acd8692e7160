"""CSV tables and SVG line charts for sweep results.

Output is byte-stable: rows follow the given profile and condition order,
numbers are written with ``repr``, and the SVG is assembled by hand with
fixed coordinate formatting.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import List, Optional, Sequence

from .studies import FIBERS, KINDS, CNDEffectPoint, StudyRecord, cnd_effect_points

__all__ = ["emit_report", "write_records_csv", "write_effects_csv", "svg_line_chart"]

_PALETTE = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
            "#1f78b4", "#b2df8a"]


def _order(values, preferred: Optional[Sequence] = None) -> List:
    seen = list(dict.fromkeys(values))
    if preferred is None:
        return seen
    rank = {v: i for i, v in enumerate(preferred)}
    return sorted(seen, key=lambda v: (rank.get(v, len(rank)), seen.index(v)))


def write_records_csv(path, records: Sequence[StudyRecord], profile_order=None, condition_order=None):
    profiles = _order([r.profile_id for r in records], profile_order)
    conds = _order([r.condition for r in records], condition_order)
    words = _order([r.word_id for r in records])
    key = lambda r: (conds.index(r.condition), profiles.index(r.profile_id), r.level_db_spl,
                     words.index(r.word_id), FIBERS.index(r.fiber_type), KINDS.index(r.kind))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["word_id", "profile_id", "level_db", "condition", "fiber", "kind", "nsim"])
        for r in sorted(records, key=key):
            w.writerow([r.word_id, r.profile_id, repr(float(r.level_db_spl)), r.condition, r.fiber_type,
                        r.kind, repr(float(r.nsim))])


def write_effects_csv(path, effects: Sequence[CNDEffectPoint], profile_order=None, condition_order=None):
    profiles = _order([e.profile_id for e in effects], profile_order)
    conds = _order([e.condition for e in effects], condition_order)
    key = lambda e: (conds.index(e.condition), profiles.index(e.profile_id), e.level_db_spl, KINDS.index(e.kind))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["profile_id", "level_db", "condition", "kind", "cnd_effect"])
        for e in sorted(effects, key=key):
            w.writerow([e.profile_id, repr(float(e.level_db_spl)), e.condition, e.kind, repr(float(e.cnd_effect))])


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def svg_line_chart(series, title: str, xlabel: str, ylabel: str, width: int = 640, height: int = 420) -> str:
    """Render ``[(label, [(x, y), ...]), ...]`` as a standalone SVG string."""
    left, right, top, bottom = 70, 190, 40, 55
    pw, ph = width - left - right, height - top - bottom
    xs = [x for _, pts in series for x, _ in pts]
    ys = [y for _, pts in series for _, y in pts]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys + [0.0]), max(ys + [0.0])) if ys else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y1 = y0 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (y1 - y) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{_fmt(left + pw / 2)}" y="22" text-anchor="middle" font-size="14">{title}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for x in sorted(set(xs)):
        out.append(f'<line x1="{_fmt(px(x))}" y1="{top + ph}" x2="{_fmt(px(x))}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px(x))}" y="{top + ph + 18}" text-anchor="middle">{x:g}</text>')
    for i in range(6):
        y = y0 + i * (y1 - y0) / 5
        out.append(f'<line x1="{left - 5}" y1="{_fmt(py(y))}" x2="{left}" y2="{_fmt(py(y))}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_fmt(py(y) + 4)}" text-anchor="end">{y:.3f}</text>')
    if y0 < 0 < y1:
        out.append(f'<line x1="{left}" y1="{_fmt(py(0))}" x2="{left + pw}" y2="{_fmt(py(0))}" '
                   f'stroke="#bbbbbb" stroke-dasharray="4 3"/>')
    out.append(f'<text x="{_fmt(left + pw / 2)}" y="{height - 12}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="18" y="{_fmt(top + ph / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 18 {_fmt(top + ph / 2)})">{ylabel}</text>')
    for k, (label, pts) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        pts = sorted(pts)
        path = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="3" fill="{color}"/>')
        ly = top + 10 + 18 * k
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly + 4}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(records: Sequence[StudyRecord], out_dir, profile_order=None, condition_order=None,
                baseline_id: Optional[str] = None, kind: str = "MR") -> List[Path]:
    """Write ``study2_records.csv``, ``cnd_effect.csv`` and one SVG per condition.

    Each SVG plots the CND effect (from `kind` neurograms) against level with
    one line per profile. Returns the written paths.
    """
    if not records:
        raise ValueError("no records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    profiles = _order([r.profile_id for r in records], profile_order)
    conds = _order([r.condition for r in records], condition_order)
    effects = cnd_effect_points(records, baseline_id or profiles[0])

    written = [out / "study2_records.csv", out / "cnd_effect.csv"]
    write_records_csv(written[0], records, profiles, conds)
    write_effects_csv(written[1], effects, profiles, conds)
    for cond in conds:
        series = []
        for pid in profiles:
            pts = [(e.level_db_spl, e.cnd_effect) for e in effects
                   if e.condition == cond and e.profile_id == pid and e.kind == kind]
            if pts:
                series.append((pid, pts))
        svg = svg_line_chart(series, f"CND effect ({kind}-NSIM), {cond}", "level (dB SPL)", "CND effect")
        p = out / f"cnd_effect_{cond}.svg"
        p.write_text(svg, encoding="utf-8")
        written.append(p)
    return written
