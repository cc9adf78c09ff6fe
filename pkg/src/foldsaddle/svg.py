"""Deterministic SVG rendering of phase portraits and scan maps.

Coordinates are written with a fixed number of decimals and every element
is emitted in a fixed order, so equal inputs give byte-identical files.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import __version__
from .core import NsvfSystem, Region, find_folds, sigma_regions
from .errors import FoldSaddleError
from .flow import advance

__all__ = ["portrait_svg", "scan_svg", "zero_locus_segments"]

_REGION_COLOR = {
    Region.CROSSING: "#9e9e9e",
    Region.SLIDING: "#1f77b4",
    Region.ESCAPING: "#d62728",
    Region.TANGENTIAL: "#000000",
    Region.PSEUDO_EQUILIBRIUM: "#000000",
}
_STABILITY_COLOR = {"Attractor": "#2ca02c", "Repeller": "#d62728",
                    "NonHyperbolic": "#9467bd"}
_PE_COLOR = {"SigmaAttractor": "#2ca02c", "SigmaRepeller": "#d62728",
             "SigmaSaddle": "#ff7f0e"}
# 21 distinguishable fills, indexed by case number
_PALETTE = ["#1f77b4", "#aec7e8", "#ff7f0e", "#ffbb78", "#2ca02c", "#98df8a",
            "#d62728", "#ff9896", "#9467bd", "#c5b0d5", "#8c564b", "#c49c94",
            "#e377c2", "#f7b6d2", "#7f7f7f", "#c7c7c7", "#bcbd22", "#dbdb8d",
            "#17becf", "#9edae5", "#393b79"]
_SIZE = 600.0


def _header(width, height):
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- generator: foldsaddle {__version__} -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}" fill="#ffffff"/>',
    ]


class _Frame:
    """Affine map from a data box to the SVG viewport (y pointing up)."""

    def __init__(self, box, size=_SIZE, margin=40.0):
        self.x0, self.x1, self.y0, self.y1 = (float(v) for v in box)
        self.size, self.margin = size, margin
        span = max(self.x1 - self.x0, self.y1 - self.y0)
        self.scale = (size - 2 * margin) / span

    def __call__(self, x, y):
        return (self.margin + (x - self.x0) * self.scale,
                self.size - self.margin - (y - self.y0) * self.scale)

    def path(self, pts):
        pts = np.asarray(pts, dtype=float)
        keep = np.all(np.isfinite(pts), axis=1)
        pts = pts[keep]
        if len(pts) < 2:
            return ""
        parts = []
        for k, (x, y) in enumerate(pts):
            u, v = self(x, y)
            parts.append(f"{'M' if k == 0 else 'L'}{u:.2f},{v:.2f}")
        return "".join(parts)


def zero_locus_segments(fun, box, n: int = 121):
    """Line segments approximating ``fun(x, y) = 0`` inside ``box``.

    Marching squares on an ``n x n`` grid with linear interpolation along
    cell edges.  ``fun`` must be vectorized.

    Returns
    -------
    list of ((x, y), (x, y))
    """
    xs = np.linspace(box[0], box[1], n)
    ys = np.linspace(box[2], box[3], n)
    X, Y = np.meshgrid(xs, ys)
    F = np.asarray(fun(X, Y), dtype=float) * np.ones_like(X)
    segs = []
    for i in range(n - 1):
        for j in range(n - 1):
            corners = [(xs[j], ys[i], F[i, j]), (xs[j + 1], ys[i], F[i, j + 1]),
                       (xs[j + 1], ys[i + 1], F[i + 1, j + 1]), (xs[j], ys[i + 1], F[i + 1, j])]
            hits = []
            for k in range(4):
                (xa, ya, fa), (xb, yb, fb) = corners[k], corners[(k + 1) % 4]
                if (fa < 0) != (fb < 0):
                    s = fa / (fa - fb)
                    hits.append((xa + s * (xb - xa), ya + s * (yb - ya)))
            if len(hits) == 2:
                segs.append((hits[0], hits[1]))
            elif len(hits) == 4:
                segs += [(hits[0], hits[1]), (hits[2], hits[3])]
    return segs


def _seed_points(Z: NsvfSystem, n: int):
    """Seeds on an ``n x n`` grid strictly inside the domain, off the line."""
    x0, x1, y0, y1 = Z.domain
    xs = x0 + (x1 - x0) * (np.arange(n) + 0.5) / n
    ys = y0 + (y1 - y0) * (np.arange(n) + 0.5) / n
    ys = np.where(np.abs(ys) < 1e-9, 1e-3 * (y1 - y0), ys)
    return [(float(x), float(y)) for y in ys for x in xs]


def portrait_svg(Z: NsvfSystem, *, seed_grid: int = 6, t_max: float = 6.0,
                 cycles=(), graph: Optional[np.ndarray] = None,
                 pseudo=(), saddle: Optional[tuple] = None,
                 title: str = "") -> str:
    """Phase portrait of a Filippov system as an SVG document.

    Parameters
    ----------
    Z : NsvfSystem
    seed_grid : int
        Trajectories start from a ``seed_grid x seed_grid`` lattice.
    t_max : float
        Time budget per trajectory.
    cycles : sequence of CanardCycle
    graph : ndarray, shape (n, 2), optional
        Polyline of a Sigma-graph.
    pseudo : sequence of PseudoEquilibrium
    saddle : tuple of float, optional
        Position of the boundary saddle.
    title : str

    Returns
    -------
    str
    """
    fr = _Frame(Z.domain)
    out = _header(_SIZE, _SIZE)
    box = Z.domain
    out.append(f'<rect x="{fr(box[0], box[3])[0]:.2f}" y="{fr(box[0], box[3])[1]:.2f}" '
               f'width="{(box[1] - box[0]) * fr.scale:.2f}" height="{(box[3] - box[2]) * fr.scale:.2f}" '
               'fill="none" stroke="#000000" stroke-width="0.5"/>')
    # loci X.f = 0 (upper half) and Y.f = 0 (lower half)
    for fld, half, color in ((Z.upper, (box[0], box[1], 0.0, box[3]), "#1f77b4"),
                             (Z.lower, (box[0], box[1], box[2], 0.0), "#d62728")):
        segs = zero_locus_segments(lambda x, y: fld.lie(x, y, 1), half)
        d = "".join(fr.path([a, b]) for a, b in segs)
        if d:
            out.append(f'<path d="{d}" fill="none" stroke="{color}" '
                       'stroke-width="0.8" stroke-dasharray="2,3"/>')
    # trajectories
    out.append('<g fill="none" stroke="#555555" stroke-width="0.6">')
    for seed in _seed_points(Z, seed_grid):
        try:
            traj = advance(Z, seed, t_max)
        except FoldSaddleError:
            continue
        d = fr.path(traj.points()[:, 1:])
        if d:
            out.append(f'<path d="{d}"/>')
    out.append("</g>")
    # switching line by region
    for iv in sigma_regions(Z):
        (u0, v0), (u1, _) = fr(iv.lo, 0.0), fr(iv.hi, 0.0)
        out.append(f'<line x1="{u0:.2f}" y1="{v0:.2f}" x2="{u1:.2f}" y2="{v0:.2f}" '
                   f'stroke="{_REGION_COLOR[iv.region]}" stroke-width="3"/>')
    for c in cycles:
        color = _STABILITY_COLOR.get(c.stability.value, "#000000")
        out.append(f'<path d="{fr.path(c.polyline)}" fill="none" stroke="{color}" stroke-width="1.6"/>')
    if graph is not None:
        out.append(f'<path d="{fr.path(graph)}" fill="none" stroke="#000000" '
                   'stroke-width="1.6" stroke-dasharray="6,3"/>')
    for f in find_folds(Z):
        u, v = fr(f.x, 0.0)
        fill = "#ffffff" if f.visibility.value == "Invisible" else "#000000"
        out.append(f'<circle cx="{u:.2f}" cy="{v:.2f}" r="4" fill="{fill}" stroke="#000000"/>')
    for q in pseudo:
        if not (box[0] <= q.x <= box[1]):
            continue
        u, v = fr(q.x, 0.0)
        out.append(f'<rect x="{u - 4:.2f}" y="{v - 4:.2f}" width="8" height="8" '
                   f'fill="{_PE_COLOR.get(q.kind.value, "#000000")}" stroke="#000000"/>')
    if saddle is not None:
        u, v = fr(*saddle)
        out.append(f'<path d="M{u - 5:.2f},{v - 5:.2f}L{u + 5:.2f},{v + 5:.2f}'
                   f'M{u - 5:.2f},{v + 5:.2f}L{u + 5:.2f},{v - 5:.2f}" '
                   'stroke="#000000" stroke-width="1.5"/>')
    if title:
        out.append(f'<text x="{fr.margin:.0f}" y="24" font-family="monospace" '
                   f'font-size="14">{_escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def scan_svg(result, curves=None, title: str = "") -> str:
    """Case map of a scan: one coloured cell per grid point plus curves.

    Parameters
    ----------
    result : ScanResult
    curves : dict of str to ndarray, optional
        Named polylines ``(lambda, beta)`` overlaid on the map.
    title : str
    """
    lams, betas = result.lambda_grid, result.beta_grid
    dl = (lams[1] - lams[0]) if lams.size > 1 else 1.0
    db = (betas[1] - betas[0]) if betas.size > 1 else 1.0
    box = (lams[0] - dl / 2, lams[-1] + dl / 2, betas[0] - db / 2, betas[-1] + db / 2)
    fr = _Frame(box)
    out = _header(_SIZE, _SIZE)
    for i in range(betas.size):
        for j in range(lams.size):
            cell = result.labels[i, j]
            u, v = fr(lams[j] - dl / 2, betas[i] + db / 2)
            if cell.status == "verified":
                n = int(cell.case_index.split("_")[0])
                fill = _PALETTE[(n - 1) % len(_PALETTE)]
            else:
                fill = "#000000"
            out.append(f'<rect x="{u:.2f}" y="{v:.2f}" width="{dl * fr.scale:.2f}" '
                       f'height="{db * fr.scale:.2f}" fill="{fill}">'
                       f"<title>{cell.case_index or cell.status}</title></rect>")
    for name in sorted(curves or {}):
        d = fr.path(curves[name])
        if d:
            out.append(f'<path d="{d}" fill="none" stroke="#000000" stroke-width="1">'
                       f"<title>{_escape(name)}</title></path>")
    if title:
        out.append(f'<text x="{fr.margin:.0f}" y="24" font-family="monospace" '
                   f'font-size="14">{_escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
