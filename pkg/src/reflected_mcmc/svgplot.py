"""Minimal deterministic SVG line plots for the CSV outputs.

No renderer or plotting library is involved: the same rows always give the
same bytes.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from .io import SchemaError, read_csv

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 190, 30, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22")
DASHES = ("", "6,3", "2,2", "8,2,2,2")

Series = Dict[str, List[Tuple[float, float]]]

SCHEMAS = {
    "acceptance": ("algorithm", "K", "epsilon", "accept_rate"),
    "acf": ("algorithm", "K", "functional_id", "lag", "rho"),
}


def _num(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _ticks(lo: float, hi: float, n: int = 5) -> List[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def _label(v: float) -> str:
    return f"{v:.6g}"


def line_plot(
    series: Series, xlabel: str, ylabel: str, title: str, log_x: bool = False, caption: str = ""
) -> str:
    if not series or not any(series.values()):
        raise SchemaError("nothing to plot")
    pts = [p for s in series.values() for p in s]
    xs = [math.log10(x) if log_x else x for x, _ in pts]
    ys = [y for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x: float) -> float:
        x = math.log10(x) if log_x else x
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def sy(y: float) -> float:
        return MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f"<desc>{_esc(caption)}</desc>" if caption else "",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{_num(MARGIN_L + pw / 2)}" y="18" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        px = MARGIN_L + (t - x0) / (x1 - x0) * pw
        text = _label(10.0**t) if log_x else _label(t)
        out.append(f'<line x1="{_num(px)}" y1="{MARGIN_T + ph}" x2="{_num(px)}" y2="{MARGIN_T + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_num(px)}" y="{MARGIN_T + ph + 18}" text-anchor="middle">{text}</text>')
    for t in _ticks(y0, y1):
        py = sy(t)
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{_num(py)}" x2="{MARGIN_L}" y2="{_num(py)}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{_num(py + 4)}" text-anchor="end">{_label(t)}</text>')
    out.append(f'<text x="{_num(MARGIN_L + pw / 2)}" y="{HEIGHT - 12}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{_num(MARGIN_T + ph / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_num(MARGIN_T + ph / 2)})">{_esc(ylabel)}</text>')
    for i, name in enumerate(sorted(series)):
        color = COLORS[i % len(COLORS)]
        dash = DASHES[(i // len(COLORS)) % len(DASHES)]
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        coords = " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y in sorted(series[name]))
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"{dash_attr}/>')
        ly = MARGIN_T + 14 + 16 * i
        lx = WIDTH - MARGIN_R + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"{dash_attr}/>')
        out.append(f'<text x="{lx + 30}" y="{ly + 4}">{_esc(name)}</text>')
    if caption:
        out.append(f'<text x="{WIDTH - MARGIN_R + 12}" y="{HEIGHT - 12}" font-size="10">{_esc(caption)}</text>')
    out.append("</svg>")
    return "\n".join(line for line in out if line) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def series_from_rows(kind: str, rows: Sequence[Dict[str, str]]) -> Series:
    series: Series = {}
    if kind == "acceptance":
        for r in rows:
            name = f"{r['algorithm']} K={r['K']}"
            series.setdefault(name, []).append((float(r["epsilon"]), float(r["accept_rate"])))
    elif kind == "acf":
        for r in rows:
            name = f"{r['algorithm']} K={r['K']} {r['functional_id']}"
            series.setdefault(name, []).append((float(r["lag"]), float(r["rho"])))
    else:
        raise SchemaError(f"unknown plot kind {kind!r}; expected one of {sorted(SCHEMAS)}")
    return series


def plot_csv(csv_path: str | Path, kind: str, svg_path: str | Path) -> Path:
    """Render ``csv_path`` as ``kind``; nothing is written if the schema check fails."""
    if kind not in SCHEMAS:
        raise SchemaError(f"unknown plot kind {kind!r}; expected one of {sorted(SCHEMAS)}")
    try:
        _, columns, rows = read_csv(csv_path)
    except OSError as exc:
        raise SchemaError(f"cannot read {csv_path}: {exc}") from exc
    missing = [c for c in SCHEMAS[kind] if c not in columns]
    if missing:
        raise SchemaError(f"{csv_path}: missing columns {missing} for a {kind} plot")
    if not rows:
        raise SchemaError(f"{csv_path}: no data rows")
    if kind == "acceptance":
        svg = line_plot(series_from_rows(kind, rows), "step size epsilon", "acceptance rate",
                        "Acceptance rate against step size", log_x=True)
    else:
        fids = sorted({r["functional_id"] for r in rows})
        svg = line_plot(series_from_rows(kind, rows), "lag", "autocorrelation", "Autocorrelation",
                        caption="functionals: " + ", ".join(fids))
    svg_path = Path(svg_path)
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    svg_path.write_text(svg, encoding="utf-8")
    return svg_path
