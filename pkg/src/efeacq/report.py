"""Line charts (mean with a one-std band) and final-value tables from summary CSVs.

The SVG is written by hand with fixed number formatting so identical inputs
give byte-identical files.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from .errors import DomainError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 30, 50


def read_summary(path: Path):
    """Return ``(iterations, {(strategy, metric): {stat: array}})``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DomainError(f"{path} has no data rows")
    header, data = rows[0], np.array(rows[1:], dtype=float)
    series = defaultdict(dict)
    for j, name in enumerate(header[1:], start=1):
        strategy, metric, stat = name.rsplit(":", 2)
        series[(strategy, metric)][stat] = data[:, j]
    return data[:, 0], dict(series)


def collect(root) -> dict:
    """Group every ``summary_<label>.csv`` under ``root`` by label.

    Series are named by strategy, prefixed with the sweep-cell directory when
    one strategy occurs in several cells.
    """
    root = Path(root)
    files = sorted(root.rglob("summary_*.csv"))
    if not files:
        raise DomainError(f"no summary CSVs under {root}")
    grouped = defaultdict(list)
    for f in files:
        label = f.stem[len("summary_"):]
        rel = f.parent.relative_to(root).as_posix()
        iters, series = read_summary(f)
        grouped[label].append((rel, iters, series))
    out = {}
    for label, entries in grouped.items():
        counts = defaultdict(int)
        for _, _, series in entries:
            for strategy in {s for s, _ in series}:
                counts[strategy] += 1
        merged = {}
        for rel, iters, series in entries:
            for (strategy, metric), stats in series.items():
                name = strategy if counts[strategy] == 1 or rel == "." else f"{rel}:{strategy}"
                merged.setdefault(metric, {})[name] = (iters, stats)
        out[label] = merged
    return out


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


def _num(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    return f"{v:.4g}"


def render_svg(title: str, metric: str, series: dict) -> str:
    """One chart; ``series`` maps name -> (iterations, {"mean", "std"})."""
    names = sorted(series)
    xs_all = np.concatenate([series[n][0] for n in names])
    lows = [series[n][1]["mean"] - series[n][1]["std"] for n in names]
    highs = [series[n][1]["mean"] + series[n][1]["std"] for n in names]
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(np.min(np.concatenate(lows))), float(np.max(np.concatenate(highs)))
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def py(y):
        return TOP + (1.0 - (y - y0) / (y1 - y0)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        parts.append(f'<line x1="{_num(px(t))}" y1="{TOP + ph}" x2="{_num(px(t))}" '
                     f'y2="{TOP + ph + 4}" stroke="black"/>')
        parts.append(f'<text x="{_num(px(t))}" y="{TOP + ph + 16}" text-anchor="middle">'
                     f'{_label(t)}</text>')
    for t in _ticks(y0, y1):
        parts.append(f'<line x1="{LEFT - 4}" y1="{_num(py(t))}" x2="{LEFT}" y2="{_num(py(t))}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{LEFT - 6}" y="{_num(py(t) + 4)}" text-anchor="end">'
                     f'{_label(t)}</text>')
    parts.append(f'<text x="{LEFT + pw / 2:.0f}" y="{HEIGHT - 10}" text-anchor="middle">'
                 f'iteration</text>')
    parts.append(f'<text x="16" y="{TOP + ph / 2:.0f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {TOP + ph / 2:.0f})">{metric}</text>')
    for i, name in enumerate(names):
        colour = PALETTE[i % len(PALETTE)]
        xs, stats = series[name]
        mean, std = stats["mean"], stats["std"]
        upper = " ".join(f"{_num(px(x))},{_num(py(y))}" for x, y in zip(xs, mean + std))
        lower = " ".join(f"{_num(px(x))},{_num(py(y))}" for x, y in zip(xs[::-1], (mean - std)[::-1]))
        parts.append(f'<polygon points="{upper} {lower}" fill="{colour}" fill-opacity="0.2" '
                     f'stroke="none"/>')
        line = " ".join(f"{_num(px(x))},{_num(py(y))}" for x, y in zip(xs, mean))
        parts.append(f'<polyline points="{line}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        ly = TOP + 10 + 16 * i
        parts.append(f'<line x1="{LEFT + pw + 10}" y1="{ly}" x2="{LEFT + pw + 28}" y2="{ly}" '
                     f'stroke="{colour}" stroke-width="2"/>')
        parts.append(f'<text x="{LEFT + pw + 32}" y="{ly + 4}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def final_table(grouped: dict) -> list[tuple]:
    rows = []
    for label in sorted(grouped):
        for metric in sorted(grouped[label]):
            for name in sorted(grouped[label][metric]):
                iters, stats = grouped[label][metric][name]
                rows.append((label, metric, name, int(iters[-1]), float(stats["mean"][-1]),
                             float(stats["std"][-1]), float(stats["median"][-1])))
    return rows


def write_report(root, out=None) -> list[Path]:
    """Charts plus ``final_values.txt``; returns the written paths."""
    grouped = collect(root)
    out = Path(out) if out is not None else Path(root) / "report"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for label, metrics in sorted(grouped.items()):
        for metric, series in sorted(metrics.items()):
            path = out / f"{label}_{metric}.svg"
            path.write_text(render_svg(f"{label}: {metric}", metric, series))
            written.append(path)
    lines = [f"{'task':<34} {'metric':<22} {'series':<24} {'iter':>5} "
             f"{'mean':>14} {'std':>12} {'median':>14}"]
    for label, metric, name, it, mean, std, med in final_table(grouped):
        lines.append(f"{label:<34} {metric:<22} {name:<24} {it:>5} "
                     f"{mean:>14.6g} {std:>12.4g} {med:>14.6g}")
    table = out / "final_values.txt"
    table.write_text("\n".join(lines) + "\n")
    written.append(table)
    return written
