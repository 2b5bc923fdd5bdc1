"""Minimal dependency-free SVG line plots."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
W, H = 720, 440
ML, MR, MT, MB = 80, 20, 40, 60


def _ticks(lo: float, hi: float, n: int = 6) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    return np.arange(np.ceil(lo / step) * step, hi + 0.5 * step, step)


def _thin(x: np.ndarray, y: np.ndarray, logx: bool, limit: int = 4000):
    if len(x) <= limit:
        return x, y
    if logx and np.all(x[1:] > 0):
        idx = np.unique(np.geomspace(1, len(x) - 1, limit).astype(int))
        idx = np.concatenate([[0], idx])
    else:
        idx = np.linspace(0, len(x) - 1, limit).astype(int)
    return x[idx], y[idx]


def line_plot(traces, xlabel: str = "", ylabel: str = "", title: str = "",
              logx: bool = False) -> str:
    """Render ``traces`` (iterable of ``(label, x, y)``) to an SVG string."""
    traces = [(str(lab), *_thin(np.asarray(x, float), np.asarray(y, float), logx))
              for lab, x, y in traces]
    if not traces:
        raise ValueError("nothing to plot")
    xs = np.concatenate([t[1] for t in traces])
    ys = np.concatenate([t[2] for t in traces])
    ok = np.isfinite(xs) & np.isfinite(ys)
    if logx:
        ok &= xs > 0
    if not np.any(ok):
        raise ValueError("no finite points to plot")
    fx = np.log10 if logx else (lambda v: v)
    x0, x1 = float(np.min(fx(xs[ok]))), float(np.max(fx(xs[ok])))
    y0, y1 = float(np.min(ys[ok])), float(np.max(ys[ok]))
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    pad = 0.05 * (y1 - y0) if y1 > y0 else 1.0
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = W - ML - MR, H - MT - MB

    def px(v):
        return ML + (fx(v) - x0) / (x1 - x0) * pw

    def py(v):
        return MT + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    xt = np.arange(np.ceil(x0), np.floor(x1) + 1) if logx else _ticks(x0, x1)
    for t in xt:
        x = ML + (t - x0) / (x1 - x0) * pw
        lab = f"1e{int(t)}" if logx else f"{t:.4g}"
        out.append(f'<line x1="{x:.1f}" y1="{MT + ph}" x2="{x:.1f}" y2="{MT + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{MT + ph + 18}" text-anchor="middle">{lab}</text>')
    for t in _ticks(y0, y1):
        y = py(t)
        out.append(f'<line x1="{ML - 5}" y1="{y:.1f}" x2="{ML}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{ML - 8}" y="{y + 4:.1f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="{H - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{MT + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {MT + ph / 2})">{escape(ylabel)}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for i, (lab, x, y) in enumerate(traces):
        keep = np.isfinite(x) & np.isfinite(y) & ((x > 0) if logx else True)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[keep], y[keep]))
        color = _COLORS[i % len(_COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = MT + 16 + 16 * i
        out.append(f'<line x1="{ML + pw - 150}" y1="{ly}" x2="{ML + pw - 125}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ML + pw - 120}" y="{ly + 4}">{escape(lab)}</text>')
    out.append("</svg>")
    return "\n".join(out)
