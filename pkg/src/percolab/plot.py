"""Minimal native SVG line/scatter plots with optional log axes."""
from __future__ import annotations

import csv
import math
from xml.sax.saxutils import escape

from .inequalities import fit_exponent

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=70, right=20, top=40, bottom=55)


def _ticks(lo: float, hi: float, log: bool) -> list:
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        return [float(t) for t in range(a, b + 1) if lo - 1e-9 <= t <= hi + 1e-9]
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / 4))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    out, t = [], start
    while t <= hi + 1e-12:
        out.append(round(t, 12))
        t += step
    return out


def _label(t: float, log: bool) -> str:
    if log:
        return f"1e{int(t)}" if t != 0 else "1"
    return f"{t:g}"


def svg_plot(x, y, *, loglog: bool = False, xlabel: str = "x", ylabel: str = "y",
             title: str = "", fit: bool | None = None, yerr=None) -> str:
    """SVG text for one series; with ``loglog`` a fitted power-law slope is annotated."""
    pts = [(float(a), float(b), float(e) if yerr is not None else 0.0)
           for a, b, e in zip(x, y, yerr if yerr is not None else [0] * len(x))]
    if loglog:
        pts = [q for q in pts if q[0] > 0 and q[1] > 0]
    if not pts:
        raise ValueError("nothing to plot")
    tx = (lambda v: math.log10(v)) if loglog else float
    X = [tx(a) for a, _, _ in pts]
    Y = [tx(b) for _, b, _ in pts]
    x0, x1 = min(X), max(X)
    y0, y1 = min(Y), max(Y)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    padx, pady = 0.05 * (x1 - x0), 0.08 * (y1 - y0)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
           'fill="none" stroke="black"/>']
    for t in _ticks(x0, x1, loglog):
        px = sx(t)
        out.append(f'<line x1="{px:.2f}" y1="{MARGIN["top"] + ph}" x2="{px:.2f}" '
                   f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">'
                   f'{_label(t, loglog)}</text>')
    for t in _ticks(y0, y1, loglog):
        py = sy(t)
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{py:.2f}" x2="{MARGIN["left"]}" '
                   f'y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{py + 4:.2f}" text-anchor="end">'
                   f'{_label(t, loglog)}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">'
                   f'{escape(title)}</text>')
    order = sorted(range(len(X)), key=X.__getitem__)
    path = " ".join(f"{sx(X[i]):.2f},{sy(Y[i]):.2f}" for i in order)
    out.append(f'<polyline points="{path}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
    for i, (a, b, e) in enumerate(pts):
        if e > 0:
            lo_v, hi_v = b - e, b + e
            if loglog:
                lo_v = max(lo_v, b * 1e-3)
            out.append(f'<line x1="{sx(X[i]):.2f}" y1="{sy(tx(lo_v)):.2f}" x2="{sx(X[i]):.2f}" '
                       f'y2="{sy(tx(hi_v)):.2f}" stroke="#1f77b4"/>')
        out.append(f'<circle cx="{sx(X[i]):.2f}" cy="{sy(Y[i]):.2f}" r="3" fill="#1f77b4"/>')
    if fit is None:
        fit = loglog
    if fit and len(pts) >= 3:
        errs = [e for _, _, e in pts] if yerr is not None else None
        f = fit_exponent([a for a, _, _ in pts], [b for _, b, _ in pts], errs)
        xa, xb = min(X), max(X)
        ya = (f.intercept + f.exponent * xa * math.log(10)) / math.log(10)
        yb = (f.intercept + f.exponent * xb * math.log(10)) / math.log(10)
        out.append(f'<line x1="{sx(xa):.2f}" y1="{sy(ya):.2f}" x2="{sx(xb):.2f}" y2="{sy(yb):.2f}" '
                   'stroke="#d62728" stroke-dasharray="5,4"/>')
        note = f"slope = {f.exponent:.4f} ± {f.stderr:.4f}" + (" (poor fit)" if f.poor_fit else "")
        out.append(f'<text x="{MARGIN["left"] + 10}" y="{MARGIN["top"] + 18}" fill="#d62728">'
                   f'{escape(note)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


ALIASES = {"n": ("n_radius",), "radius": ("n_radius", "box_radius")}


def _params_of(row: dict) -> dict:
    out = {}
    for col in ("param1", "param2"):
        for part in (row.get(col) or "").split(";"):
            k, sep, v = part.partition("=")
            if sep:
                out[k] = v
    return out


def _column(row: dict, name: str) -> float:
    """Value of a CSV column.

    Parameter keys inside ``param1``/``param2`` are addressable by name and
    take precedence; ``n`` on a theta table means the radius ``n_radius``.
    """
    params = _params_of(row)
    for key in (name,) + ALIASES.get(name, ()):
        if key in params:
            return float(params[key])
    if row.get(name, "") != "":
        return float(row[name])
    raise KeyError(f"column {name!r} not found")


def plot_csv(path, x: str, y: str, loglog: bool = False, err: str | None = "stderr",
             title: str = "") -> str:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    xs = [_column(r, x) for r in rows]
    ys = [_column(r, y) for r in rows]
    es = None
    if err and rows and err in rows[0]:
        es = [float(r[err] or 0) for r in rows]
    return svg_plot(xs, ys, loglog=loglog, xlabel=x, ylabel=y, title=title, yerr=es)
