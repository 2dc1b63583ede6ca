"""Deterministic report emitters: JSON documents, scatter CSV and SVG plots."""

from __future__ import annotations

import json
from xml.sax.saxutils import escape

SVG_SIZE = 600
_MARGIN = 60
_PLOT = SVG_SIZE - 2 * _MARGIN


def to_json(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def scatter_csv(scatter) -> str:
    """``scatter`` rows are ``(prob_r, prob_c, y_r, y_c)``."""
    lines = ["prob_r,prob_c,y_r,y_c"]
    for pr, pc, yr, yc in scatter:
        lines.append(f"{float(pr)!r},{float(pc)!r},{int(yr)},{int(yc)}")
    return "\n".join(lines) + "\n"


def _px(v: float) -> float:
    return _MARGIN + _PLOT * v


def _py(v: float) -> float:
    return SVG_SIZE - _MARGIN - _PLOT * v


def _line(x1, y1, x2, y2, style: str) -> str:
    return f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}" {style}/>'


def scatter_svg(points, title: str = "", x_label: str = "prob_r (base)", y_label: str = "prob_c (counterfactual)") -> str:
    """600x600 scatter of probability pairs with the y = x line and 0.5 guides.

    Points above the diagonal moved towards label 1 under the intervention.
    """
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" '
        f'viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">',
        f'<rect x="0" y="0" width="{SVG_SIZE}" height="{SVG_SIZE}" fill="white"/>',
        _line(_px(0), _py(0), _px(1), _py(0), 'stroke="black" stroke-width="1"'),
        _line(_px(0), _py(0), _px(0), _py(1), 'stroke="black" stroke-width="1"'),
    ]
    for v in (0.0, 0.5, 1.0):
        out.append(f'<text x="{_px(v):.3f}" y="{_py(0) + 20:.3f}" font-size="12" text-anchor="middle">{v:g}</text>')
        out.append(f'<text x="{_px(0) - 10:.3f}" y="{_py(v) + 4:.3f}" font-size="12" text-anchor="end">{v:g}</text>')
    out.append(f'<text x="{_px(0.5):.3f}" y="{SVG_SIZE - 15}" font-size="14" text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text x="20" y="{_py(0.5):.3f}" font-size="14" text-anchor="middle" '
               f'transform="rotate(-90 20 {_py(0.5):.3f})">{escape(y_label)}</text>')
    if title:
        out.append(f'<text x="{SVG_SIZE / 2:.3f}" y="30" font-size="16" text-anchor="middle">{escape(title)}</text>')
    out.append(_line(_px(0), _py(0), _px(1), _py(1), 'stroke="gray" stroke-width="1" stroke-dasharray="6,4"'))
    out.append(_line(_px(0.5), _py(0), _px(0.5), _py(1), 'stroke="gray" stroke-width="1" stroke-dasharray="2,3"'))
    out.append(_line(_px(0), _py(0.5), _px(1), _py(0.5), 'stroke="gray" stroke-width="1" stroke-dasharray="2,3"'))
    for p in points:
        x, y = float(p[0]), float(p[1])
        out.append(f'<circle cx="{_px(x):.3f}" cy="{_py(y):.3f}" r="2.5" fill="steelblue" fill-opacity="0.6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def importance_svg(ranking, scores: dict, title: str = "") -> str:
    """Horizontal bars for global importance scores in ranking order (range [-1, 1])."""
    bar_h, gap, top = 22, 8, 50
    height = top + len(ranking) * (bar_h + gap) + 40
    mid = SVG_SIZE / 2 + 60
    half = SVG_SIZE - mid - 30
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{height}" '
        f'viewBox="0 0 {SVG_SIZE} {height}">',
        f'<rect x="0" y="0" width="{SVG_SIZE}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{SVG_SIZE / 2:.3f}" y="25" font-size="16" text-anchor="middle">{escape(title)}</text>')
    out.append(_line(mid, top - 5, mid, height - 35, 'stroke="black" stroke-width="1"'))
    for k, name in enumerate(ranking):
        v = float(scores[name])
        y = top + k * (bar_h + gap)
        w = abs(v) * half
        x = mid if v >= 0 else mid - w
        color = "seagreen" if v >= 0 else "indianred"
        out.append(f'<text x="10" y="{y + bar_h - 6}" font-size="13">{escape(name)}</text>')
        out.append(f'<rect x="{x:.3f}" y="{y}" width="{w:.3f}" height="{bar_h}" fill="{color}"/>')
        out.append(f'<text x="{mid + (half + 5 if v >= 0 else -half - 5):.3f}" y="{y + bar_h - 6}" font-size="12" '
                   f'text-anchor="{"start" if v >= 0 else "end"}">{v:+.3f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
