"""Byte-deterministic SVG plots of grid and trial CSV tables."""

from __future__ import annotations

import csv
import io
import math
from xml.sax.saxutils import escape

from dtlab.errors import FormatError
from dtlab.experiments import CSV_HEADER, RELIABILITY_LIMIT

KINDS = ("frontier", "error-vs-resource")
WIDTH, HEIGHT = 640, 480
LEFT, RIGHT, TOP, BOTTOM = 80, 30, 40, 60


def parse_table(text: str) -> list[dict[str, str]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise FormatError("CSV header does not match the experiment table schema")
    out = []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise FormatError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        out.append(dict(zip(CSV_HEADER, row)))
    return out


def _float(row, key) -> float | None:
    raw = row[key]
    if raw == "":
        return None
    try:
        return float(raw)
    except ValueError:
        raise FormatError(f"column {key}: not a number: {raw!r}") from None


class _Axis:
    def __init__(self, lo: float, hi: float, log: bool, pixel_lo: float, pixel_hi: float):
        if log:
            lo, hi = math.floor(math.log2(lo)), math.ceil(math.log2(hi))
        if hi <= lo:
            hi = lo + 1
        self.lo, self.hi, self.log = lo, hi, log
        self.p0, self.p1 = pixel_lo, pixel_hi

    def __call__(self, v: float) -> float:
        t = math.log2(v) if self.log else v
        return self.p0 + (t - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)

    def ticks(self) -> list[tuple[float, str]]:
        if self.log:
            step = max(1, math.ceil((self.hi - self.lo) / 10))
            return [(2.0**e, f"2^{e}") for e in range(int(self.lo), int(self.hi) + 1, step)]
        k = 5
        return [(self.lo + i * (self.hi - self.lo) / k, f"{self.lo + i * (self.hi - self.lo) / k:.2f}")
                for i in range(k + 1)]


def _f(x: float) -> str:
    return f"{x:.2f}"


def _frame(title: str, xlabel: str, ylabel: str, xa: _Axis, ya: _Axis) -> list[str]:
    x0, x1 = LEFT, WIDTH - RIGHT
    y0, y1 = HEIGHT - BOTTOM, TOP
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<g class="axes" stroke="black" fill="none">'
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>',
    ]
    for v, label in xa.ticks():
        px = _f(xa(v))
        out.append(f'<line class="tick" x1="{px}" y1="{y0}" x2="{px}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{px}" y="{y0 + 18}" text-anchor="middle">{label}</text>')
    for v, label in ya.ticks():
        py = _f(ya(v))
        out.append(f'<line class="tick" x1="{x0 - 5}" y1="{py}" x2="{x0}" y2="{py}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{py}" text-anchor="end" dominant-baseline="middle">{label}</text>')
    out.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{(y0 + y1) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(y0 + y1) / 2})">{escape(ylabel)}</text>')
    return out


def _resource_column(rows) -> str:
    for key in ("mem_bits", "buckets", "ell"):
        if any(r[key] for r in rows):
            return key
    return "mem_bits"


def _frontier(rows, log: bool) -> str:
    key = _resource_column(rows)
    pts = []
    for r in rows:
        x, y = _float(r, key), _float(r, "mean_samples")
        if x is None or y is None or x <= 0 or y <= 0:
            raise FormatError(f"frontier rows need positive {key} and mean_samples")
        pts.append((x, y, r["is_reliable"] == "true"))
    curves = []
    if rows:
        n, eps = float(rows[0]["n"]), float(rows[0]["eps"])
        curves = [("k*m = n/eps^2", n / eps**2), ("k*m = n log2(n)/eps^4", n * math.log2(n) / eps**4)]
    xs = [p[0] for p in pts] or [1.0, 2.0]
    ys = [p[1] for p in pts] or [1.0, 2.0]
    xa = _Axis(min(xs), max(xs), log, LEFT, WIDTH - RIGHT)
    ya = _Axis(min(ys), max(ys), log, HEIGHT - BOTTOM, TOP)
    out = _frame("Reliability frontier", key, "samples", xa, ya)
    for i, (label, product) in enumerate(curves):
        seg = []
        steps = 32
        for s in range(steps + 1):
            t = xa.lo + (xa.hi - xa.lo) * s / steps
            m = 2.0**t if log else t
            if m <= 0:
                continue
            k = product / m
            if log:
                k = 2.0 ** min(max(math.log2(k), ya.lo), ya.hi)
            else:
                k = min(max(k, ya.lo), ya.hi)
            seg.append(f"{_f(xa(m))},{_f(ya(k))}")
        out.append(f'<polyline class="reference" points="{" ".join(seg)}" fill="none" '
                   f'stroke="{("#888888", "#444444")[i]}" stroke-dasharray="6 4"/>')
        out.append(f'<text x="{WIDTH - RIGHT - 4}" y="{TOP + 14 * (i + 1)}" text-anchor="end" '
                   f'fill="{("#888888", "#444444")[i]}">{escape(label)}</text>')
    for x, y, ok in pts:
        fill = "#1f77b4" if ok else "white"
        out.append(f'<circle class="marker" cx="{_f(xa(x))}" cy="{_f(ya(y))}" r="4" '
                   f'stroke="#1f77b4" fill="{fill}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _error_vs_resource(rows, log: bool) -> str:
    key = "mean_samples"
    for cand in ("mean_comm_bits", "mean_peak_bits"):
        if rows and all(r[cand] for r in rows):
            key = cand
            break
    pts = []
    for r in rows:
        x = _float(r, key)
        e, lo, hi = (_float(r, k) for k in ("err_rate", "err_lo", "err_hi"))
        if x is None or x <= 0 or None in (e, lo, hi):
            raise FormatError(f"error rows need positive {key} and error columns")
        pts.append((x, e, lo, hi))
    xs = [p[0] for p in pts] or [1.0, 2.0]
    xa = _Axis(min(xs), max(xs), log, LEFT, WIDTH - RIGHT)
    ya = _Axis(0.0, 1.0, False, HEIGHT - BOTTOM, TOP)
    out = _frame("Error rate vs resource", key, "error rate", xa, ya)
    py = _f(ya(RELIABILITY_LIMIT))
    out.append(f'<polyline class="reference" points="{LEFT},{py} {WIDTH - RIGHT},{py}" fill="none" '
               f'stroke="#888888" stroke-dasharray="6 4"/>')
    for x, e, lo, hi in pts:
        px = _f(xa(x))
        out.append(f'<line class="errorbar" x1="{px}" y1="{_f(ya(lo))}" x2="{px}" y2="{_f(ya(hi))}" stroke="#d62728"/>')
        out.append(f'<circle class="marker" cx="{px}" cy="{_f(ya(e))}" r="4" stroke="#d62728" fill="#d62728"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(csv_text: str, kind: str, log: bool = True) -> str:
    """SVG for a result table; ``log`` puts the resource axis (and, for the
    frontier, the sample axis) on a base-2 log scale."""
    if kind not in KINDS:
        raise FormatError(f"unknown plot kind {kind!r}; choose from {', '.join(KINDS)}")
    rows = parse_table(csv_text)
    return _frontier(rows, log) if kind == "frontier" else _error_vs_resource(rows, log)
