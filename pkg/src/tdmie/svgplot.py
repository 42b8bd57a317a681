"""Minimal deterministic SVG line/scatter plots for the CSV outputs."""

from __future__ import annotations

import csv
import enum
from pathlib import Path

import numpy as np

WIDTH, HEIGHT = 640, 480
MARGIN = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


class PlotKind(enum.Enum):
    TIMESERIES = "timeseries"
    SPECTRUM = "spectrum"
    EIGENMAP = "eigenmap"


class CsvFormatError(ValueError):
    pass


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Numeric CSV with one header row; ``#`` lines are skipped."""
    header = None
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            if header is None:
                header = [h.strip() for h in row]
                continue
            if len(row) != len(header):
                raise CsvFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from None
    if header is None:
        raise CsvFormatError(f"{path}:1: missing header")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


def _col(header, data, *names):
    for name in names:
        if name in header:
            return data[:, header.index(name)]
    raise CsvFormatError(f"none of the columns {names} found in header {header}")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.3g}"


class _Frame:
    def __init__(self, xlim, ylim, square=False):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.w = WIDTH - 2 * MARGIN
        self.h = HEIGHT - 2 * MARGIN
        if square:
            side = min(self.w, self.h)
            self.w = self.h = side

    def px(self, x):
        return MARGIN + (x - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, y):
        return MARGIN + self.h - (y - self.y0) / (self.y1 - self.y0) * self.h


def _limits(values, pad=0.05):
    values = values[np.isfinite(values)] if values.size else values
    if values.size == 0:
        return 0.0, 1.0
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


def _axes(fr: _Frame, xlabel: str, ylabel: str, title: str) -> list[str]:
    out = [
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{fr.w}" height="{fr.h}" fill="none" stroke="black"/>',
        f'<text x="{_fmt(MARGIN + fr.w / 2)}" y="{HEIGHT - 15}" text-anchor="middle">{xlabel}</text>',
        f'<text x="15" y="{_fmt(MARGIN + fr.h / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 15 {_fmt(MARGIN + fr.h / 2)})">{ylabel}</text>',
        f'<text x="{_fmt(MARGIN + fr.w / 2)}" y="{MARGIN - 20}" text-anchor="middle">{title}</text>',
    ]
    for i in range(5):
        xv = fr.x0 + (fr.x1 - fr.x0) * i / 4
        yv = fr.y0 + (fr.y1 - fr.y0) * i / 4
        out.append(f'<text x="{_fmt(fr.px(xv))}" y="{MARGIN + fr.h + 18}" text-anchor="middle" font-size="11">{_tick(xv)}</text>')
        out.append(f'<text x="{MARGIN - 5}" y="{_fmt(fr.py(yv) + 4)}" text-anchor="end" font-size="11">{_tick(yv)}</text>')
    return out


def _polyline(fr, x, y, color) -> str:
    pts = " ".join(f"{_fmt(fr.px(a))},{_fmt(fr.py(b))}" for a, b in zip(x, y) if np.isfinite(b))
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>'


def _document(body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">'
    )
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"


def render(header, data, kind: PlotKind, title: str = "") -> str:
    kind = PlotKind(kind)
    if kind is PlotKind.EIGENMAP:
        re = _col(header, data, "re")
        im = _col(header, data, "im")
        lim = max(1.1, float(np.max(np.abs(np.concatenate([re, im])))) * 1.05 if re.size else 1.1)
        fr = _Frame((-lim, lim), (-lim, lim), square=True)
        body = _axes(fr, "Re", "Im", title)
        r = 1.0 / (2 * lim) * fr.w
        body.append(
            f'<path class="unit-circle" d="M {_fmt(fr.px(0) - r)},{_fmt(fr.py(0))} '
            f'a {_fmt(r)},{_fmt(r)} 0 1,0 {_fmt(2 * r)},0 a {_fmt(r)},{_fmt(r)} 0 1,0 {_fmt(-2 * r)},0" '
            f'fill="none" stroke="gray" stroke-dasharray="4 3"/>'
        )
        for a, b in zip(re, im):
            body.append(f'<circle cx="{_fmt(fr.px(a))}" cy="{_fmt(fr.py(b))}" r="2.5" fill="{COLORS[0]}"/>')
        return _document(body)
    if kind is PlotKind.SPECTRUM:
        f = _col(header, data, "f_hz") / 1e9
        curves = []
        for i, (re_name, im_name, label) in enumerate((("td_re", "td_im", "TD"), ("fd_re", "fd_im", "FD"))):
            if re_name in header and f.size:
                mag = np.hypot(_col(header, data, re_name), _col(header, data, im_name))
                with np.errstate(divide="ignore"):
                    curves.append((label, 20.0 * np.log10(mag), COLORS[i]))
        ys = np.concatenate([c[1] for c in curves]) if curves else np.zeros(0)
        fr = _Frame(_limits(f, 0.0), _limits(ys))
        body = _axes(fr, "f (GHz)", "|J| (dB)", title)
        for k, (label, y, color) in enumerate(curves):
            body.append(_polyline(fr, f, y, color))
            body.append(f'<text x="{WIDTH - MARGIN - 40}" y="{MARGIN + 15 + 15 * k}" fill="{color}">{label}</text>')
        return _document(body)
    # time series: reconstructed trace (t, re) or coefficient table (order 0)
    if "order" in header:
        keep = _col(header, data, "order") == 0
        t = _col(header, data, "t_start")[keep]
        y = _col(header, data, "re")[keep]
    else:
        t = _col(header, data, "t", "t_s")
        y = _col(header, data, "re")
    t_ns = t * 1e9
    fr = _Frame(_limits(t_ns, 0.0), _limits(y))
    body = _axes(fr, "t (ns)", "Re J", title)
    if t.size:
        body.append(_polyline(fr, t_ns, y, COLORS[0]))
    return _document(body)


def emit_plot(csv_path, kind, out_path=None) -> Path:
    """Render ``csv_path`` as SVG next to it (or at ``out_path``)."""
    csv_path = Path(csv_path)
    header, data = read_csv(csv_path)
    out = Path(out_path) if out_path else csv_path.with_suffix(".svg")
    out.write_text(render(header, data, kind, title=csv_path.stem))
    return out
