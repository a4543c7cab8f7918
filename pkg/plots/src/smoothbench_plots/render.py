"""Renderers for the four figure kinds.

Each reads the experiment artifacts, validates the schema, and draws only
the numbers found there (means, stderrs, reference bounds, fitted slopes,
check verdicts).
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .spec import FigureSpec, SpecError
from .svg import Canvas

ERR_HEADER = ["rep", "t_final", "sigma", "d", "eps", "seed", "cum_err"]
COMPLEXITY_HEADER = ["kind", "m", "reps", "point", "stderr"]


def _read_csv(path: str, expected_header: list[str]) -> list[dict]:
    p = Path(path)
    if not p.exists():
        raise SpecError(f"input file does not exist: {path}")
    with p.open(encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SpecError(f"{path}: empty file, no header") from None
        if header != expected_header:
            missing = [c for c in expected_header if c not in header]
            extra = [c for c in header if c not in expected_header]
            raise SpecError(
                f"{path}: schema mismatch; missing columns {missing}, "
                f"unexpected columns {extra}")
        rows = [dict(zip(header, row)) for row in reader if row]
    if not rows:
        raise SpecError(f"{path}: no data rows")
    return rows


def _read_summary(path: str | None) -> dict:
    if path is None:
        raise SpecError("this figure kind needs a 'summary' input")
    p = Path(path)
    if not p.exists():
        raise SpecError(f"input file does not exist: {path}")
    with p.open(encoding="utf-8") as fh:
        return json.load(fh)


def _per_T(summary: dict) -> list[dict]:
    entries = summary.get("per_T")
    if not entries:
        raise SpecError("summary.json has no per_T entries")
    needed = {"T", "mean_cum_err", "stderr"}
    for e in entries:
        missing = needed - set(e)
        if missing:
            raise SpecError(f"summary per_T entry missing fields {sorted(missing)}")
    return sorted(entries, key=lambda e: e["T"])


def _geom_ticks(lo: float, hi: float, n: int = 4) -> list[float]:
    if lo <= 0:
        lo = hi / 1000.0
    ratio = (hi / lo) ** (1.0 / (n - 1)) if hi > lo else 2.0
    return [lo * ratio**i for i in range(n)]


def _fmt_tick(v: float) -> str:
    if v >= 100 or v == int(v):
        return f"{v:.0f}"
    return f"{v:.3g}"


def render_err_curve(spec: FigureSpec) -> str:
    if spec.rows is None:
        raise SpecError("err_curve needs a 'rows' input")
    _read_csv(spec.rows, ERR_HEADER)
    summary = _read_summary(spec.summary)
    entries = _per_T(summary)
    Ts = [e["T"] for e in entries]
    means = [e["mean_cum_err"] for e in entries]
    bands_lo = [max(m - 2 * e["stderr"], 1e-9) for m, e in zip(means, entries)]
    bands_hi = [m + 2 * e["stderr"] for m, e in zip(means, entries)]
    bounds = [e.get("reference_bound", 0.0) for e in entries]
    positive_bounds = [b for b in bounds if b > 0]

    y_lo = min(bands_lo + (positive_bounds or bands_lo)) * 0.8
    y_hi = max(bands_hi) * 1.25
    canvas = Canvas(spec.title or "cumulative error vs horizon",
                    spec.xlabel or "T", spec.ylabel or "cumulative error")
    canvas.set_limits(min(Ts) * 0.9, max(Ts) * 1.1, y_lo, y_hi,
                      x_log=True, y_log=True)
    canvas.frame()
    canvas.x_ticks(Ts, [f"{t:d}" for t in Ts])
    canvas.y_ticks([round(v, 3) for v in _geom_ticks(y_lo * 1.05, y_hi * 0.95)],
                   [_fmt_tick(v) for v in _geom_ticks(y_lo * 1.05, y_hi * 0.95)])
    band = list(zip(Ts, bands_hi)) + list(zip(reversed(Ts), reversed(bands_lo)))
    canvas.polygon(band, fill="#1f77b4", elem_id="stderr-band")
    canvas.polyline(list(zip(Ts, means)), stroke="#1f77b4", elem_id="mean-curve")
    for t, m in zip(Ts, means):
        canvas.circle(t, m)
    if positive_bounds and len(positive_bounds) == len(Ts):
        canvas.polyline(list(zip(Ts, bounds)), stroke="#d62728", dash="6 4",
                        elem_id="reference-bound")
        canvas.label(canvas.px(Ts[0]), canvas.py(bounds[0]) + 14,
                     "reference floor", size=10, fill="#d62728")
    return canvas.to_string()


def render_scaling_fit(spec: FigureSpec) -> str:
    if spec.rows is None:
        raise SpecError("scaling_fit needs a 'rows' input")
    _read_csv(spec.rows, ERR_HEADER)
    summary = _read_summary(spec.summary)
    entries = _per_T(summary)
    if "slope" not in summary:
        raise SpecError("summary.json has no fitted slope field")
    slope = float(summary["slope"])
    Ts = [e["T"] for e in entries]
    means = [e["mean_cum_err"] for e in entries]
    y_lo, y_hi = min(means) * 0.8, max(means) * 1.25
    canvas = Canvas(spec.title or "scaling fit", spec.xlabel or "T",
                    spec.ylabel or "mean cumulative error")
    canvas.set_limits(min(Ts) * 0.9, max(Ts) * 1.1, y_lo, y_hi,
                      x_log=True, y_log=True)
    canvas.frame()
    canvas.x_ticks(Ts, [f"{t:d}" for t in Ts])
    canvas.y_ticks([round(v, 3) for v in _geom_ticks(y_lo * 1.05, y_hi * 0.95)],
                   [_fmt_tick(v) for v in _geom_ticks(y_lo * 1.05, y_hi * 0.95)])
    for t, m in zip(Ts, means):
        canvas.circle(t, m, fill="#2ca02c")
    # Fitted line through the log-log centroid with the summary's slope.
    cx = sum(math.log10(t) for t in Ts) / len(Ts)
    cy = sum(math.log10(m) for m in means) / len(means)
    line = [(t, 10 ** (cy + slope * (math.log10(t) - cx))) for t in Ts]
    canvas.polyline(line, stroke="#2ca02c", elem_id="fit-line")
    canvas.label(canvas.px(Ts[-1]), canvas.py(line[-1][1]) - 8,
                 f"slope={slope:.3f}", anchor="end", fill="#2ca02c")
    return canvas.to_string()


def _collect_checks(summary: dict) -> list[tuple[str, float, float, bool]]:
    checks = []
    if "checks" in summary:
        for i, c in enumerate(summary["checks"]):
            checks.append((f"check {i}", float(c["lhs"]), float(c["rhs"]),
                           bool(c["pass"])))
    elif "small_ball" in summary:
        sb = summary["small_ball"]
        checks.append(("small ball", float(sb["max_violation"]), float(sb["bound"]),
                       bool(sb["pass"])))
        nd = summary["norm_domination"]
        checks.append(("norm domination", float(nd["lhs"]), float(nd["rhs"]),
                       bool(nd["pass"])))
    elif "lhs" in summary:
        checks.append((summary.get("experiment", "check"), float(summary["lhs"]),
                       float(summary["rhs"]), bool(summary["pass"])))
    if not checks:
        raise SpecError("summary.json carries no recognizable check verdicts")
    return checks


def render_inequality_margin(spec: FigureSpec) -> str:
    summary = _read_summary(spec.summary)
    checks = _collect_checks(summary)
    n = len(checks)
    lo = min(0.0, min(lhs for _, lhs, _, _ in checks))
    hi = max(max(lhs for _, lhs, _, _ in checks),
             max(rhs for _, _, rhs, _ in checks)) * 1.15 + 1e-9
    canvas = Canvas(spec.title or "inequality margins",
                    spec.xlabel or "value", spec.ylabel or "")
    canvas.set_limits(lo, hi, 0.0, float(n))
    canvas.frame()
    ticks = [lo + (hi - lo) * f for f in (0.0, 0.25, 0.5, 0.75, 1.0)]
    canvas.x_ticks([round(t, 4) for t in ticks], [_fmt_tick(t) for t in ticks])
    for i, (label, lhs, rhs, ok) in enumerate(checks):
        base = n - 1 - i
        color = "#2ca02c" if ok else "#d62728"
        canvas.rect_data(min(0.0, lhs), base + 0.55, max(lhs, 1e-12), base + 0.8,
                         fill=color, elem_id=f"lhs-{i}")
        canvas.rect_data(0.0, base + 0.2, rhs, base + 0.45, fill="#7f7f7f",
                         elem_id=f"rhs-{i}")
        canvas.label(canvas.px(hi * 0.995), canvas.py(base + 0.62), label,
                     size=10, anchor="end")
        canvas.label(canvas.px(hi * 0.995), canvas.py(base + 0.27),
                     "PASS" if ok else "FAIL", size=10, anchor="end", fill=color)
    return canvas.to_string()


def render_complexity_bars(spec: FigureSpec) -> str:
    if spec.rows is None:
        raise SpecError("complexity_bars needs a 'rows' input")
    rows = _read_csv(spec.rows, COMPLEXITY_HEADER)
    kinds = [r["kind"] for r in rows]
    points = [float(r["point"]) for r in rows]
    errs = [2 * float(r["stderr"]) if r["stderr"] != "nan" else 0.0 for r in rows]
    lo = min(0.0, min(p - e for p, e in zip(points, errs)))
    hi = max(p + e for p, e in zip(points, errs)) * 1.2 + 1e-9
    canvas = Canvas(spec.title or "complexity estimates", spec.xlabel or "",
                    spec.ylabel or "estimate")
    canvas.set_limits(0.0, float(len(rows)), lo, hi)
    canvas.frame()
    ticks = [lo + (hi - lo) * f for f in (0.0, 0.25, 0.5, 0.75, 1.0)]
    canvas.y_ticks([round(t, 4) for t in ticks], [_fmt_tick(t) for t in ticks])
    for i, (kind, p, e) in enumerate(zip(kinds, points, errs)):
        canvas.rect_data(i + 0.2, 0.0, i + 0.8, p, fill="#1f77b4",
                         elem_id=f"bar-{i}")
        if e > 0:
            canvas.polyline([(i + 0.5, p - e), (i + 0.5, p + e)], stroke="#333",
                            width=1.2)
        canvas.label(canvas.px(i + 0.5), canvas.py(lo) + 14, kind, size=9,
                     anchor="middle")
    return canvas.to_string()


_RENDERERS = {
    "err_curve": render_err_curve,
    "scaling_fit": render_scaling_fit,
    "inequality_margin": render_inequality_margin,
    "complexity_bars": render_complexity_bars,
}


def render(spec: FigureSpec) -> Path:
    """Render one figure; the output file is written only after the inputs
    validate, so a failed render leaves nothing behind."""
    content = _RENDERERS[spec.kind](spec)
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(content, encoding="utf-8", newline="\n")
    return out
