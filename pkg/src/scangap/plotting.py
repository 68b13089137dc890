"""Self-contained SVG charts for harness reports."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from . import fileio
from .errors import FormatError, PreconditionError
from .harness import AccuracyReport, PairwiseReport, SweepReport, TimingReport, report_from_json

PLOT_KINDS = ("sensitivity_curves", "accuracy_heatmap", "timing_bars", "distribution_hist")

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

W, H = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 220, 50, 60


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _svg(width: int, height: int, title: str, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<text class="title" x="{width / 2:.1f}" y="28" text-anchor="middle" font-size="16">{escape(title)}</text>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _axes(xlabel: str, ylabel: str, ylo: float, yhi: float) -> list[str]:
    x0, x1, y0, y1 = LEFT, W - RIGHT, H - BOTTOM, TOP
    out = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2:.1f}" y="{H - 20}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="18" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for k in range(5):
        v = ylo + (yhi - ylo) * k / 4
        y = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{x0 - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="10">{_fmt(v)}</text>')
    return out


def _legend(labels: Sequence[str]) -> list[str]:
    out = ['<g class="legend">']
    for i, lab in enumerate(labels):
        y = TOP + 10 + 18 * i
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{W - RIGHT + 15}" y="{y - 9}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{W - RIGHT + 32}" y="{y + 1}" font-size="11">{escape(lab)}</text>')
    out.append("</g>")
    return out


def sensitivity_curves(report: SweepReport, normalise: bool = True) -> str:
    """One polyline per metric: mean value against perturbation level.

    With ``normalise`` each curve is min-max scaled to [0, 1] so metrics with
    different units share the axis.
    """
    curves = {m: report.curve(m) for m in report.metrics}
    curves = {m: c for m, c in curves.items() if any(v is not None for v in c)}
    if not curves or len(report.levels) < 2:
        raise PreconditionError("sweep report has no values to plot")
    xs = report.levels
    xlo, xhi = min(xs), max(xs)
    series = {}
    for m, c in curves.items():
        vals = np.array([np.nan if v is None else v for v in c], dtype=float)
        if normalise:
            lo, hi = np.nanmin(vals), np.nanmax(vals)
            vals = (vals - lo) / (hi - lo) if hi > lo else np.zeros_like(vals)
        series[m] = vals
    ylo = 0.0 if normalise else float(min(np.nanmin(v) for v in series.values()))
    yhi = 1.0 if normalise else float(max(np.nanmax(v) for v in series.values()))
    if yhi == ylo:
        yhi = ylo + 1.0

    def px(x):
        return LEFT + (W - RIGHT - LEFT) * (x - xlo) / (xhi - xlo)

    def py(y):
        return H - BOTTOM - (H - BOTTOM - TOP) * (y - ylo) / (yhi - ylo)

    body = _axes(report.modifier + " level", "normalised metric value" if normalise else "metric value", ylo, yhi)
    for x in xs:
        body.append(f'<text x="{px(x):.1f}" y="{H - BOTTOM + 16}" text-anchor="middle" font-size="10">{_fmt(x)}</text>')
    for i, (m, vals) in enumerate(series.items()):
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, vals) if not math.isnan(y))
        body.append(f'<polyline class="curve" data-metric="{escape(m)}" fill="none" '
                    f'stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="2" points="{pts}"/>')
    body += _legend(list(series))
    return _svg(W, H, f"Metric sensitivity to {report.modifier}", body)


def accuracy_heatmap(report: AccuracyReport) -> str:
    """Metric x modifier grid, cell shade and label = accuracy."""
    if not report.entries:
        raise PreconditionError("accuracy report is empty")
    metrics = list(dict.fromkeys(e.metric for e in report.entries))
    mods = list(dict.fromkeys(e.modifier for e in report.entries))
    cw, ch, left, top = 90, 28, 190, 60
    width, height = left + cw * len(mods) + 20, top + ch * len(metrics) + 80
    body = []
    for j, mod in enumerate(mods):
        x = left + cw * j + cw / 2
        body.append(f'<text x="{x:.1f}" y="{top - 8}" text-anchor="middle" font-size="9">{escape(mod[:18])}</text>')
    for i, m in enumerate(metrics):
        y = top + ch * i
        body.append(f'<text x="{left - 6}" y="{y + ch / 2 + 4:.1f}" text-anchor="end" font-size="11">{escape(m)}</text>')
        for j, mod in enumerate(mods):
            acc = next((e.accuracy for e in report.entries if e.metric == m and e.modifier == mod), None)
            x = left + cw * j
            if acc is None:
                fill, label = "#eeeeee", "n/a"
            else:
                shade = int(round(255 * (1 - acc)))
                fill, label = f"rgb({shade},{shade},255)", f"{acc:.2f}"
            body.append(f'<rect class="cell" x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}" stroke="white"/>')
            body.append(f'<text x="{x + cw / 2:.1f}" y="{y + ch / 2 + 4:.1f}" text-anchor="middle" font-size="11">{label}</text>')
    return _svg(width, height, "Accuracy of metrics per modifier", body)


def timing_bars(report: TimingReport, size: int | None = None) -> str:
    """Horizontal bars of mean wall time, sorted ascending, for one cloud size (default: largest)."""
    sizes = sorted({e.size for e in report.entries if e.mean_s is not None})
    if not sizes:
        raise PreconditionError("timing report has no completed measurements")
    size = size or sizes[-1]
    rows = sorted((e for e in report.entries if e.size == size and e.mean_s is not None), key=lambda e: e.mean_s)
    top, bh, left = 60, 24, 190
    width, height = 720, top + bh * len(rows) + 60
    span = max(e.mean_s for e in rows) or 1.0
    body = []
    for i, e in enumerate(rows):
        y = top + bh * i
        w = (width - left - 120) * e.mean_s / span
        body.append(f'<text x="{left - 6}" y="{y + bh / 2 + 4:.1f}" text-anchor="end" font-size="11">{escape(e.metric)}</text>')
        body.append(f'<rect class="bar" data-metric="{escape(e.metric)}" x="{left}" y="{y + 3}" width="{w:.2f}" '
                    f'height="{bh - 6}" fill="{PALETTE[i % len(PALETTE)]}"/>')
        body.append(f'<text x="{left + w + 6:.1f}" y="{y + bh / 2 + 4:.1f}" font-size="10">{e.mean_s:.4g} s</text>')
    return _svg(width, height, f"Computation time ({size} points)", body)


def distribution_hist(report: PairwiseReport, bins: int = 10) -> str:
    """Small-multiple histograms of each metric's values across scan pairs."""
    per = {m: [r["value"] for r in report.rows if r["metric"] == m and r["value"] is not None] for m in report.metrics}
    per = {m: v for m, v in per.items() if v}
    if not per:
        raise PreconditionError("pairwise report has no values")
    pw, ph, cols = 220, 160, 3
    nrows = math.ceil(len(per) / cols)
    width, height = pw * cols + 20, ph * nrows + 60
    body = []
    for k, (m, vals) in enumerate(per.items()):
        ox, oy = 10 + pw * (k % cols), 50 + ph * (k // cols)
        counts, edges = np.histogram(vals, bins=bins)
        top = counts.max() or 1
        body.append(f'<g class="panel" data-metric="{escape(m)}">')
        body.append(f'<text x="{ox + pw / 2}" y="{oy + 12}" text-anchor="middle" font-size="11">{escape(m)}</text>')
        bw = (pw - 30) / bins
        for b, c in enumerate(counts):
            h = (ph - 50) * c / top
            body.append(f'<rect x="{ox + 15 + b * bw:.1f}" y="{oy + ph - 25 - h:.1f}" width="{bw - 1:.1f}" '
                        f'height="{h:.1f}" fill="{PALETTE[k % len(PALETTE)]}"/>')
        body.append(f'<text x="{ox + 15}" y="{oy + ph - 10}" font-size="9">{_fmt(edges[0])}</text>')
        body.append(f'<text x="{ox + pw - 15}" y="{oy + ph - 10}" text-anchor="end" font-size="9">{_fmt(edges[-1])}</text>')
        body.append("</g>")
    return _svg(width, height, "Distribution of metric values across scan pairs", body)


def render(report_path, kind: str) -> str:
    report = report_from_json(report_path)
    expected = {
        "sensitivity_curves": SweepReport,
        "accuracy_heatmap": AccuracyReport,
        "timing_bars": TimingReport,
        "distribution_hist": PairwiseReport,
    }
    if kind not in expected:
        raise PreconditionError(f"unknown plot kind {kind!r}; expected one of {', '.join(PLOT_KINDS)}")
    if not isinstance(report, expected[kind]):
        raise FormatError(f"{kind} needs a {expected[kind].kind} report, got {report.kind}")
    return globals()[kind](report)


def plot(report_path, kind: str, out_path) -> Path:
    """Render and write atomically; nothing is written when rendering fails."""
    svg = render(report_path, kind)
    out_path = Path(out_path)
    with fileio.atomic_write(out_path, "w") as fh:
        fh.write(svg)
    return out_path
