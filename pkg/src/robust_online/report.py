"""CSV records and a minimal SVG line chart."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

SUMMARY_COLUMNS = ("run_id", "seed", "predictor", "kernel", "T", "cum_errors", "guarantee_event")
CURVE_COLUMNS = ("T", "median", "q90", "mean")


def _event_text(v) -> str:
    return "" if v is None else ("true" if v else "false")


def _event_value(s: str):
    if s == "":
        return None
    if s not in ("true", "false"):
        raise ValueError(f"bad guarantee_event value {s!r}")
    return s == "true"


def summary_rows(summary, exp) -> list[dict]:
    """One record per Monte Carlo run."""
    return [
        {"run_id": i, "seed": int(s), "predictor": exp.predictor, "kernel": exp.kernel_name,
         "T": int(exp.T), "cum_errors": int(c), "guarantee_event": e}
        for i, (s, c, e) in enumerate(zip(summary.seeds, summary.cum_errors, summary.events))
    ]


def format_summary(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([r["run_id"], r["seed"], r["predictor"], r["kernel"], r["T"], r["cum_errors"],
                    _event_text(r["guarantee_event"])])
    return buf.getvalue()


def parse_summary(text: str) -> list[dict]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != SUMMARY_COLUMNS:
        raise ValueError(f"unexpected summary header {header}")
    out = []
    for row in reader:
        run_id, seed, pred, kern, T, ce, ev = row
        out.append({"run_id": int(run_id), "seed": int(seed), "predictor": pred, "kernel": kern,
                    "T": int(T), "cum_errors": int(ce), "guarantee_event": _event_value(ev)})
    return out


def format_curve(points) -> str:
    """``points`` are ``(x, median, q90, mean)`` tuples."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for p in points:
        w.writerow([repr(v) if isinstance(v, float) else v for v in p])
    return buf.getvalue()


def parse_curve(text: str) -> list[tuple]:
    reader = csv.reader(io.StringIO(text))
    next(reader)
    return [tuple(float(v) for v in row) for row in reader]


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def svg_line_chart(xs, ys, *, loglog=False, title="", xlabel="", ylabel="", width=480, height=320) -> str:
    """Polyline chart with corner tick labels; log10 axes when ``loglog``."""
    pad = 48
    if loglog:
        pts = [(math.log10(x), math.log10(y)) for x, y in zip(xs, ys) if x > 0 and y > 0]
    else:
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)]
    if not pts:
        raise ValueError("nothing to plot")
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    def lab(v):
        return f"{10 ** v:.4g}" if loglog else f"{v:.4g}"

    poly = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in pts)
    dots = "".join(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3"/>' for a, b in pts)
    scale = " (log-log)" if loglog else ""
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{title}{scale}</text>\n'
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>\n'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>\n'
        f'<text x="{pad}" y="{height - pad + 14}">{lab(x0)}</text>\n'
        f'<text x="{width - pad}" y="{height - pad + 14}" text-anchor="end">{lab(x1)}</text>\n'
        f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end">{lab(y0)}</text>\n'
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end">{lab(y1)}</text>\n'
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">{xlabel}</text>\n'
        f'<text x="14" y="{height / 2}" transform="rotate(-90 14 {height / 2})" text-anchor="middle">{ylabel}</text>\n'
        f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{poly}"/>\n'
        f'<g fill="steelblue">{dots}</g>\n'
        "</svg>\n"
    )
