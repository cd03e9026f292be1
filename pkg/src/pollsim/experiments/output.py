"""CSV tables and self-contained SVG figures, byte-deterministic."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union


@dataclass
class Table:
    """A figure-ready table: named columns, typed cells (int/float/str/None).

    String cells must not look numeric, so that a written CSV parses back
    into an equal table.
    """
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)   # round-trips exactly
    return str(value)


def _parse_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def table_to_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_format_cell(v) for v in row])
    return buf.getvalue()


def write_csv(table: Table, path: Union[str, Path]) -> None:
    Path(path).write_text(table_to_csv(table), encoding="utf-8")


def read_csv(path: Union[str, Path]) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [tuple(_parse_cell(c) for c in row) for row in reader]
    return Table(columns, rows)


# ---------------------------------------------------------------------------
# SVG rendering (no external references, deterministic output)

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 36, 56
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


class _Scale:
    def __init__(self, values, pixel_lo, pixel_hi, log=False):
        finite = [v for v in values if v is not None and not math.isnan(v)]
        if not finite:
            finite = [0.0, 1.0]
        lo, hi = min(finite), max(finite)
        if log:
            lo = max(lo, 1e-12)
            hi = max(hi, lo * 10)
            self.lo, self.hi = math.log10(lo), math.log10(hi)
        else:
            if hi == lo:
                hi = lo + 1.0
            pad = 0.05 * (hi - lo)
            self.lo, self.hi = lo - pad, hi + pad
        self.log = log
        self.plo, self.phi = pixel_lo, pixel_hi

    def __call__(self, v: float) -> float:
        x = math.log10(max(v, 1e-12)) if self.log else v
        frac = (x - self.lo) / (self.hi - self.lo)
        return self.plo + frac * (self.phi - self.plo)

    def ticks(self, n=5):
        if self.log:
            lo, hi = math.ceil(self.lo), math.floor(self.hi)
            return [10 ** k for k in range(int(lo), int(hi) + 1)] or [1.0]
        step = (self.hi - self.lo) / n
        return [self.lo + i * step for i in range(n + 1)]


def _chart_header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
        f'height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]


def _axes(xs: _Scale, ys: _Scale, xlabel: str, ylabel: str) -> list[str]:
    parts = [
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" '
        f'y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
        f'stroke="black"/>',
        f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - 12}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12">'
        f'{xlabel}</text>',
        f'<text x="16" y="{(_MT + _H - _MB) / 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2})">{ylabel}</text>',
    ]
    for t in xs.ticks():
        px = xs(t)
        parts.append(f'<line x1="{_fmt(px)}" y1="{_H - _MB}" '
                     f'x2="{_fmt(px)}" y2="{_H - _MB + 4}" stroke="black"/>')
        parts.append(f'<text x="{_fmt(px)}" y="{_H - _MB + 18}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="10">{_fmt(t)}</text>')
    for t in ys.ticks():
        py = ys(t)
        parts.append(f'<line x1="{_ML - 4}" y1="{_fmt(py)}" x2="{_ML}" '
                     f'y2="{_fmt(py)}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 8}" y="{_fmt(py)}" '
                     f'text-anchor="end" dominant-baseline="middle" '
                     f'font-family="sans-serif" font-size="10">'
                     f'{_fmt(t)}</text>')
    return parts


def _finish(parts: list[str], path: Optional[Union[str, Path]]) -> str:
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def svg_line_chart(table: Table, x: str, ys: Sequence[str],
                   path=None, title: str = "", xlabel: str = "",
                   ylabel: str = "", logy: bool = False) -> str:
    """Polyline chart: one line per y column."""
    xv = table.column(x)
    series = {name: table.column(name) for name in ys}
    xs = _Scale(xv, _ML, _W - _MR)
    all_y = [v for col in series.values() for v in col if v is not None]
    yscale = _Scale(all_y, _H - _MB, _MT, log=logy)
    parts = _chart_header(title) + _axes(xs, yscale, xlabel or x,
                                         ylabel or ",".join(ys))
    for i, (name, col) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        points = " ".join(
            f"{_fmt(xs(a))},{_fmt(yscale(b))}"
            for a, b in zip(xv, col) if a is not None and b is not None)
        parts.append(f'<polyline fill="none" stroke="{color}" '
                     f'stroke-width="1.5" points="{points}"/>')
        parts.append(f'<text x="{_W - _MR - 4}" '
                     f'y="{_MT + 14 + 14 * i}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11" '
                     f'fill="{color}">{name}</text>')
    return _finish(parts, path)


def svg_quartile_chart(table: Table, x: str,
                       cols=("min", "q1", "median", "q3", "max"),
                       path=None, title: str = "", xlabel: str = "",
                       ylabel: str = "",
                       annotate: Optional[str] = None) -> str:
    """Distribution chart: a vertical span with ticks at the quartiles."""
    xv = table.column(x)
    quart = [table.column(c) for c in cols]
    xs = _Scale(xv, _ML, _W - _MR)
    all_y = [v for col in quart for v in col if v is not None]
    yscale = _Scale(all_y, _H - _MB, _MT)
    parts = _chart_header(title) + _axes(xs, yscale, xlabel or x, ylabel)
    notes = table.column(annotate) if annotate else [None] * len(xv)
    for i, a in enumerate(xv):
        vals = [col[i] for col in quart]
        if any(v is None for v in vals):
            continue
        px = xs(a)
        lo, q1, med, q3, hi = (yscale(v) for v in vals)
        parts.append(f'<line x1="{_fmt(px)}" y1="{_fmt(lo)}" '
                     f'x2="{_fmt(px)}" y2="{_fmt(hi)}" stroke="#1f77b4"/>')
        for py, half in ((lo, 5), (q1, 3), (med, 7), (q3, 3), (hi, 5)):
            parts.append(f'<line x1="{_fmt(px - half)}" y1="{_fmt(py)}" '
                         f'x2="{_fmt(px + half)}" y2="{_fmt(py)}" '
                         f'stroke="#1f77b4" stroke-width="2"/>')
        if notes[i] is not None:
            parts.append(f'<text x="{_fmt(px)}" y="{_fmt(hi - 6)}" '
                         f'text-anchor="middle" font-family="sans-serif" '
                         f'font-size="9">{notes[i]}</text>')
    return _finish(parts, path)


def svg_errorbar_chart(table: Table, x: str, cols=("min", "mean", "max"),
                       path=None, title: str = "", xlabel: str = "",
                       ylabel: str = "", logy: bool = False) -> str:
    """Min/avg/max error bars with a line through the averages."""
    xv = table.column(x)
    lo_c, mid_c, hi_c = (table.column(c) for c in cols)
    xs = _Scale(xv, _ML, _W - _MR)
    all_y = [v for v in lo_c + mid_c + hi_c if v is not None]
    yscale = _Scale(all_y, _H - _MB, _MT, log=logy)
    parts = _chart_header(title) + _axes(xs, yscale, xlabel or x, ylabel)
    pts = []
    for a, lo, mid, hi in zip(xv, lo_c, mid_c, hi_c):
        if None in (a, lo, mid, hi):
            continue
        px = xs(a)
        parts.append(f'<line x1="{_fmt(px)}" y1="{_fmt(yscale(lo))}" '
                     f'x2="{_fmt(px)}" y2="{_fmt(yscale(hi))}" '
                     f'stroke="#d62728"/>')
        for v in (lo, hi):
            parts.append(f'<line x1="{_fmt(px - 4)}" '
                         f'y1="{_fmt(yscale(v))}" x2="{_fmt(px + 4)}" '
                         f'y2="{_fmt(yscale(v))}" stroke="#d62728"/>')
        pts.append(f"{_fmt(px)},{_fmt(yscale(mid))}")
    parts.append(f'<polyline fill="none" stroke="#1f77b4" '
                 f'stroke-width="1.5" points="{" ".join(pts)}"/>')
    return _finish(parts, path)
