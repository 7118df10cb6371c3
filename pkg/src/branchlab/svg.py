"""Self-contained SVG phase portraits of the two branches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import contourpy
import numpy as np

from . import __version__
from .branching import EulerBranching
from .errors import BranchLabError
from .fields import Rect, SingularPoint
from .integrate import EventSpec, integrate_until

__all__ = ["PortraitStyle", "zero_curves", "streamlines", "shading_from_certificate", "render_portrait"]

_CSS = """
.frame{fill:#ffffff;stroke:#444444;stroke-width:1}
.branch-f{fill:none;stroke:#1f5fbf;stroke-width:0.9;stroke-opacity:0.7}
.branch-g{fill:none;stroke:#c0392b;stroke-width:0.9;stroke-opacity:0.7;stroke-dasharray:4 2}
.curve{fill:none;stroke-width:1.6}
.curve-f0{stroke:#0b3d91}.curve-f1{stroke:#2e86c1}.curve-g0{stroke:#922b21}.curve-g1{stroke:#e67e22}
.chaotic-set{fill:#27ae60;fill-opacity:0.25;stroke:#1e8449;stroke-width:1.2}
.chaotic-arc{fill:none;stroke:#1e8449;stroke-width:3}
.eq-f{fill:#1f5fbf;stroke:#000000;stroke-width:0.8}
.eq-g{fill:#c0392b;stroke:#000000;stroke-width:0.8}
text{font-family:sans-serif;font-size:11px;fill:#222222}
"""


@dataclass(frozen=True)
class PortraitStyle:
    width: int = 640
    height: int = 480
    margin: int = 40
    seeds: int = 7
    curve_grid: int = 241
    stream_length: float = 0.35


def zero_curves(eb: EulerBranching, n: int = 241) -> List[Tuple[str, int, List[np.ndarray]]]:
    """Zero sets of each component of ``f`` and ``g`` as polylines.

    Returns ``(branch, component, lines)`` tuples.
    """
    X, Y = eb.domain.grid(n)
    gen_in = []
    for label, fld in (("f", eb.f), ("g", eb.g)):
        U, V = fld.eval_grid(X, Y)
        gen_in.append((label, 0, U))
        gen_in.append((label, 1, V))
    out = []
    for label, comp, Z in gen_in:
        z = np.ma.masked_invalid(Z)
        gen = contourpy.contour_generator(X, Y, z, name="serial")
        out.append((label, comp, [np.asarray(line) for line in gen.lines(0.0)]))
    return out


def streamlines(eb: EulerBranching, label: str, seeds: int, length: float) -> List[np.ndarray]:
    """Forward streamlines of one branch from a fixed ``seeds x seeds`` lattice."""
    d = eb.domain
    fld = eb.branch(label.upper())
    xs = d.x0 + (np.arange(seeds) + 0.5) / seeds * (d.x1 - d.x0)
    ys = d.y0 + (np.arange(seeds) + 0.5) / seeds * (d.y1 - d.y0)
    U, V = fld.eval_grid(*np.meshgrid(xs, ys))
    speed = np.hypot(U, V)
    floor = 1e-3 * float(np.nanmedian(speed)) if np.any(np.isfinite(speed)) else 0.0
    # stop once the flow has settled near an equilibrium
    slow = EventSpec(lambda t, p: float(np.hypot(*fld(p))) - floor, direction="falling", terminal=True)
    lines = []
    for y in ys:
        for x in xs:
            try:
                tr, _ = integrate_until(fld, (x, y), 0.0, [slow], 1e3, rtol=1e-6, atol=1e-9, domain=d)
            except BranchLabError:
                continue
            tr = _clip_length(tr.p, length * d.diagonal)
            if len(tr) >= 2:
                lines.append(tr)
    return lines


def _clip_length(P: np.ndarray, limit: float) -> np.ndarray:
    seg = np.hypot(*np.diff(P, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    return P[: int(np.searchsorted(cum, limit, side="right"))]


class _Canvas:
    def __init__(self, domain: Rect, style: PortraitStyle):
        self.d = domain
        self.s = style
        self.w = style.width - 2 * style.margin
        self.h = style.height - 2 * style.margin

    def xy(self, p) -> Tuple[float, float]:
        d, m = self.d, self.s.margin
        u = m + (p[0] - d.x0) / (d.x1 - d.x0) * self.w
        v = m + (d.y1 - p[1]) / (d.y1 - d.y0) * self.h
        return u, v

    def path(self, P: np.ndarray, closed: bool = False) -> str:
        pts = []
        for p in P:
            if not np.all(np.isfinite(p)):
                continue
            u, v = self.xy(p)
            # thin to roughly half-pixel spacing
            if pts and abs(u - pts[-1][0]) + abs(v - pts[-1][1]) < 0.5:
                continue
            pts.append((u, v))
        last = P[-1]
        if np.all(np.isfinite(last)) and pts and self.xy(last) != pts[-1]:
            pts.append(self.xy(last))
        if len(pts) < 2:
            return ""
        body = " ".join(f"{u:.2f},{v:.2f}" for u, v in pts)
        return "M" + body.replace(" ", " L", 1) + (" Z" if closed else "")


def shading_from_certificate(cert) -> Optional[Tuple[str, np.ndarray]]:
    """``(variant, points)`` from a certificate object or its JSON dict, if it has a geometry."""
    if cert is None:
        return None
    if isinstance(cert, dict):
        geo = cert.get("geometry")
        if not geo:
            return None
        pts = geo.get("boundary_points") or geo.get("arc_points")
        return geo["variant"], np.asarray(pts, dtype=float)
    geo = cert.geometry
    if geo is None:
        return None
    return geo.variant, np.asarray(geo.loop.polygon if geo.variant == "Region" else geo.arc, dtype=float)


def _polyline(canvas: _Canvas, P: np.ndarray, cls: str, closed: bool = False) -> str:
    d = canvas.path(P, closed)
    return f'<path class="{cls}" d="{d}"/>' if d else ""


def render_portrait(
    eb: EulerBranching,
    *,
    chaotic_set: Optional[Tuple[str, np.ndarray]] = None,
    equilibria: Optional[Sequence[Tuple[str, SingularPoint]]] = None,
    curve_labels: Iterable[str] = ("f_x=0", "f_y=0", "g_x=0", "g_y=0"),
    title: str = "",
    style: PortraitStyle = PortraitStyle(),
) -> str:
    """SVG document with streamlines of both branches, their nullclines,
    equilibrium markers and the chaotic set ``(variant, points)`` if given.
    Output depends only on the inputs."""
    cv = _Canvas(eb.domain, style)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- branchlab {__version__} -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.width}" height="{style.height}" '
        f'viewBox="0 0 {style.width} {style.height}">',
        f"<style>{_CSS}</style>",
        f'<rect class="frame" x="{style.margin}" y="{style.margin}" width="{cv.w}" height="{cv.h}"/>',
    ]
    if chaotic_set is not None:
        variant, pts = chaotic_set
        if variant == "Region":
            out.append(_polyline(cv, pts, "chaotic-set", closed=True))
        else:
            out.append(_polyline(cv, pts, "chaotic-arc"))
    for label in ("f", "g"):
        out.append(f'<g id="streamlines-{label}">')
        out.extend(s for s in (_polyline(cv, P, f"branch-{label}") for P in streamlines(eb, label, style.seeds, style.stream_length)) if s)
        out.append("</g>")
    labels = list(curve_labels)
    for k, (label, comp, lines) in enumerate(zero_curves(eb, style.curve_grid)):
        name = escape(labels[k]) if k < len(labels) else f"{label}{comp}"
        out.append(f'<g class="curve curve-{label}{comp}" id="curve-{k}"><title>{name}</title>')
        out.extend(s for s in (_polyline(cv, P, f"curve curve-{label}{comp}") for P in lines) if s)
        out.append("</g>")
    for label, sp in equilibria or ():
        u, v = cv.xy(sp.location)
        out.append(
            f'<circle class="eq-{label}" cx="{u:.2f}" cy="{v:.2f}" r="4">'
            f"<title>{label}: {sp.kind.value} ({sp.location[0]:.4f}, {sp.location[1]:.4f})</title></circle>"
        )
    legend_y = style.margin - 10
    legend = "  ".join(f"{lab}" for lab in labels)
    if title:
        out.append(f'<text x="{style.margin}" y="{legend_y - 12}">{escape(title)}</text>')
    out.append(f'<text x="{style.margin}" y="{legend_y}">f: solid blue, g: dashed red; curves: {escape(legend)}</text>')
    d = eb.domain
    out.append(f'<text x="{style.margin}" y="{style.height - 12}">[{d.x0:g}, {d.x1:g}] x [{d.y0:g}, {d.y1:g}]</text>')
    out.append("</svg>")
    return "\n".join(s for s in out if s) + "\n"
