"""Deterministic writers for traces (CSV), reports (JSON) and plots (SVG)."""

from __future__ import annotations

import io
import json
import math
from pathlib import Path

import numpy as np

from ..errors import EmptySeries, IOFailure
from ..trace import Trace

__all__ = ["CSV_DERIVED", "csv_header", "trace_csv", "dumps_json", "plot_svg", "write_text",
           "LOG_FLOOR", "MAX_PLOT_POINTS"]

CSV_DERIVED = ("res_yosida", "dist_to_zero", "rate_idx_dx", "rate_idx_mu", "lyapunov_eps_beta")

#: Values at or below zero are drawn at this floor on log axes.
LOG_FLOOR = 1e-16

#: Longer series are thinned by a fixed stride (the last point is kept).
MAX_PLOT_POINTS = 2000


def csv_header(dim: int):
    return ["index", "t_or_k"] + [f"x_{i}" for i in range(dim)] + list(CSV_DERIVED)


def _cell(v) -> str:
    v = float(v)
    return repr(v) if math.isfinite(v) else ""


def trace_csv(trace: Trace) -> str:
    """Render ``trace`` with the fixed column schema; NaN becomes an empty field."""
    buf = io.StringIO()
    buf.write(",".join(csv_header(trace.dim)) + "\n")
    n = len(trace)
    cols = [trace.derived.get(name, np.full(n, np.nan)) for name in CSV_DERIVED]
    for i in range(n):
        cells = [str(i), _cell(trace.index[i])]
        cells += [_cell(v) for v in trace.x[i]]
        cells += [_cell(c[i]) for c in cols]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _thin(x, y):
    n = len(x)
    if n <= MAX_PLOT_POINTS:
        return x, y
    stride = int(math.ceil(n / MAX_PLOT_POINTS))
    keep = np.arange(0, n, stride)
    if keep[-1] != n - 1:
        keep = np.append(keep, n - 1)
    return x[keep], y[keep]


def plot_svg(series, axis=None) -> str:
    """Line chart with a log-scale y axis.

    Parameters
    ----------
    series : mapping of label to ``(x, y)``
        Rendered in insertion order, one polyline each.
    axis : dict, optional
        ``xlabel``, ``ylabel``, ``title``, ``width``, ``height``.

    Raises
    ------
    EmptySeries
        If there are no series or any series has no points.
    """
    axis = dict(axis or {})
    if not series:
        raise EmptySeries("nothing to plot")
    data = []
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.size == 0 or x.shape != y.shape:
            raise EmptySeries(f"series {label!r} is empty or misshapen")
        y = np.where(np.isfinite(y) & (y > LOG_FLOOR), y, LOG_FLOOR)
        data.append((str(label),) + _thin(x, y))

    width, height = int(axis.get("width", 640)), int(axis.get("height", 420))
    left, right, top, bottom = 70, 160, 30, 50
    pw, ph = width - left - right, height - top - bottom
    xmin = min(float(d[1].min()) for d in data)
    xmax = max(float(d[1].max()) for d in data)
    if xmax == xmin:
        xmax = xmin + 1.0
    ly = [np.log10(d[2]) for d in data]
    dmin = math.floor(min(float(v.min()) for v in ly))
    dmax = math.ceil(max(float(v.max()) for v in ly))
    if dmax == dmin:
        dmax = dmin + 1

    def px(v):
        return left + (v - xmin) / (xmax - xmin) * pw

    def py(v):
        return top + (dmax - v) / (dmax - dmin) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if axis.get("title"):
        out.append(f'<text x="{left + pw / 2:.2f}" y="18" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="13">{_esc(axis["title"])}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    step = max(1, int(math.ceil((dmax - dmin) / 10)))
    for d in range(dmin, dmax + 1, step):
        yy = py(d)
        out.append(f'<line x1="{left}" y1="{yy:.2f}" x2="{left + pw}" y2="{yy:.2f}" '
                   'stroke="#dddddd" stroke-width="0.5"/>')
        out.append(f'<text x="{left - 6}" y="{yy + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">1e{d}</text>')
    for i in range(6):
        xv = xmin + (xmax - xmin) * i / 5
        out.append(f'<text x="{px(xv):.2f}" y="{top + ph + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="10">{xv:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 12}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{_esc(axis.get("xlabel", "x"))}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.2f}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12" transform="rotate(-90 16 {top + ph / 2:.2f})">'
               f'{_esc(axis.get("ylabel", "y"))}</text>')
    for i, ((label, x, _), lv) in enumerate(zip(data, ly)):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, lv))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly0 = top + 14 + 16 * i
        out.append(f'<line x1="{left + pw + 10}" y1="{ly0 - 4}" x2="{left + pw + 30}" '
                   f'y2="{ly0 - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 36}" y="{ly0}" font-family="sans-serif" '
                   f'font-size="11">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
