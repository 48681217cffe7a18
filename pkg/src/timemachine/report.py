"""CSV tables and small self-contained SVG line charts."""

from __future__ import annotations

import datetime
import math
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

GRID_HEADER = "mu,ntm,mean_loglik,sd_loglik,mean_events,mean_wall_ms,n,repeats,seed"


def fmt(value) -> str:
    """12 significant digits for reals, plain text for everything else."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.12g}"
    text = str(value)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def stamp_line(command: str) -> str:
    now = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return f"# timemachine {command} generated {now}"


def write_csv(path, header: Sequence[str] | str, rows: Iterable[Sequence], command: str) -> Path:
    """Write a timestamp comment line, the header, then one line per row."""
    path = Path(path)
    head = header if isinstance(header, str) else ",".join(header)
    lines = [stamp_line(command), head]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def grid_rows(rows) -> list:
    return [[getattr(r, f) for f in GRID_HEADER.split(",")] for r in rows]


def read_csv(path) -> tuple[list, list]:
    """Parse a file written by :func:`write_csv`; returns (header, rows of str)."""
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    header = lines[0].split(",")
    return header, [l.split(",") for l in lines[1:]]


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def line_chart(
    series: dict,
    title: str,
    xlabel: str,
    ylabel: str,
    width: int = 640,
    height: int = 420,
) -> str:
    """One polyline per entry of ``series`` (label -> (xs, ys)), as SVG text."""
    left, right, top, bottom = 70, 130, 40, 50
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if math.isfinite(y)]
    if not pts:
        raise ValueError("nothing to plot")
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in range(5):
        fx = x0 + (x1 - x0) * t / 4
        fy = y0 + (y1 - y0) * t / 4
        out.append(f'<text x="{sx(fx):.1f}" y="{top + ph + 16}" text-anchor="middle">{fx:.4g}</text>')
        out.append(f'<text x="{left - 6}" y="{sy(fy) + 4:.1f}" text-anchor="end">{fy:.4g}</text>')
        out.append(
            f'<line x1="{left}" x2="{left + pw}" y1="{sy(fy):.1f}" y2="{sy(fy):.1f}" stroke="#ddd"/>'
        )
    out.append(
        f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for k, (label, (xs, ys)) in enumerate(series.items()):
        colour = _PALETTE[k % len(_PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys) if math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.8" points="{coords}"/>')
        ly = top + 14 + 18 * k
        out.append(
            f'<line x1="{left + pw + 12}" x2="{left + pw + 36}" y1="{ly}" y2="{ly}" '
            f'stroke="{colour}" stroke-width="2"/>'
        )
        out.append(f'<text x="{left + pw + 42}" y="{ly + 4}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def grid_charts(result, out_dir, scenario: str = "") -> list:
    """Log-likelihood and mean-events charts for a grid result."""
    out_dir = Path(out_dir)
    levels = sorted({r.ntm for r in result.rows})
    loglik, events = {}, {}
    for t in levels:
        rows = sorted(result.level(t), key=lambda r: r.mu)
        label = "full tree (TM=1)" if t == 1 else f"TM={t}"
        xs = [r.mu for r in rows]
        loglik[label] = (xs, [r.mean_loglik for r in rows])
        events[label] = (xs, [r.mean_events for r in rows])
    suffix = f" ({scenario})" if scenario else ""
    paths = [out_dir / "loglik.svg", out_dir / "events.svg"]
    paths[0].write_text(line_chart(loglik, "Estimated log-likelihood" + suffix, "mu", "mean log-likelihood"))
    paths[1].write_text(line_chart(events, "Backward events per replicate" + suffix, "mu", "mean events"))
    return paths
