"""Report artefacts: deterministic JSON, long-format CSV and SVG line plots."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

SCHEMA_VERSION = 1


@dataclass
class Claim:
    name: str
    paper_anchor: str
    value: float
    threshold: float
    comparison: str  # "<" or ">="
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "paper_anchor": self.paper_anchor,
            "value": self.value,
            "threshold": self.threshold,
            "comparison": self.comparison,
            "pass": self.passed,
            "details": self.details,
        }


def below(name: str, anchor: str, value: float, threshold: float, **details) -> Claim:
    return Claim(name, anchor, value, threshold, "<", bool(value < threshold), details)


def at_least(name: str, anchor: str, value: float, threshold: float, **details) -> Claim:
    return Claim(name, anchor, value, threshold, ">=", bool(value >= threshold), details)


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    text = format(x, ".17g")
    return text if ("." in text or "e" in text) else text + ".0"


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON with sorted keys and floats at 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_string(str(k))}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return _string(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _string(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def write_report(path: Path, config_name: str, jobs: list[dict]) -> None:
    claims = [c for j in jobs for c in j["claims"]]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": config_name,
        "jobs": jobs,
        "all_pass": all(c["pass"] for c in claims),
        "claim_count": len(claims),
    }
    path.write_text(dumps(doc) + "\n")


def write_samples(path: Path, rows: Sequence[tuple]) -> None:
    """Columns: job, quantity, t, s, value."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["job", "quantity", "t", "s", "value"])
        for job, q, t, s, v in rows:
            w.writerow([job, q, _csv_num(t), _csv_num(s), _csv_num(v)])


def _csv_num(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".17g")


def svg_lines(
    path: Path,
    series: dict[str, tuple[Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    loglog: bool = False,
) -> None:
    """Minimal standalone SVG line chart."""
    W, H, M = 640, 420, 60
    data = {}
    for name, (xs, ys) in series.items():
        pts = [(float(x), float(y)) for x, y in zip(xs, ys) if np.isfinite(x) and np.isfinite(y)]
        if loglog:
            pts = [(math.log10(x), math.log10(y)) for x, y in pts if x > 0 and y > 0]
        if pts:
            data[name] = pts
    allx = [p[0] for v in data.values() for p in v] or [0.0, 1.0]
    ally = [p[1] for v in data.values() for p in v] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def X(x):
        return M + (x - x0) / (x1 - x0) * (W - 2 * M)

    def Y(y):
        return H - M - (y - y0) / (y1 - y0) * (H - 2 * M)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="24" text-anchor="middle" font-size="16">{_esc(title)}</text>',
        f'<line x1="{M}" y1="{H - M}" x2="{W - M}" y2="{H - M}" stroke="black"/>',
        f'<line x1="{M}" y1="{M}" x2="{M}" y2="{H - M}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle" font-size="12">{_esc(xlabel)}</text>',
        f'<text x="15" y="{H / 2}" transform="rotate(-90 15 {H / 2})" text-anchor="middle" font-size="12">{_esc(ylabel)}</text>',
        f'<text x="{M}" y="{H - M + 16}" font-size="10">{x0:.3g}</text>',
        f'<text x="{W - M}" y="{H - M + 16}" font-size="10" text-anchor="end">{x1:.3g}</text>',
        f'<text x="{M - 4}" y="{H - M}" font-size="10" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{M - 4}" y="{M + 4}" font-size="10" text-anchor="end">{y1:.3g}</text>',
    ]
    for i, (name, pts) in enumerate(sorted(data.items())):
        c = colors[i % len(colors)]
        poly = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{poly}"/>')
        out.append(f'<text x="{W - M + 4}" y="{M + 14 * i}" font-size="11" fill="{c}">{_esc(name)}</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
