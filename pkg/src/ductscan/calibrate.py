"""Reference-triangle detection and drawing scale recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contour import Contour, ContourSet, contour_area, perimeter
from .geometry import fit_line, line_intersection, polygon_area, simplify_closed
from .raster import PIXEL_CENTRE

REFERENCE_SIDE_MM = 500.0
EQUILATERAL_TOL = 0.02
MIN_SIDE_PX = 20.0


class CalibrationError(Exception):
    pass


class ReferenceNotFound(CalibrationError):
    pass


class AmbiguousReference(CalibrationError):
    pass


@dataclass(frozen=True)
class ReferenceNode:
    vertices: tuple[tuple[float, float], ...]  # continuous pixel frame, counter-clockwise on screen, topmost first
    side_px: float
    side_mm: float = REFERENCE_SIDE_MM
    contour_id: int | None = None

    def __post_init__(self):
        if not self.side_px > 0:
            raise ValueError("side_px must be positive")

    @property
    def sides(self) -> list[float]:
        v = np.asarray(self.vertices)
        return [float(np.hypot(*(v[(i + 1) % 3] - v[i]))) for i in range(3)]

    @property
    def centroid(self) -> tuple[float, float]:
        c = np.asarray(self.vertices).mean(axis=0)
        return float(c[0]), float(c[1])


def _three_corners(points: np.ndarray) -> np.ndarray | None:
    per = perimeter(points)
    frac = 0.02
    while frac <= 0.10 + 1e-9:
        poly = simplify_closed(points, frac * per)
        if len(poly) == 3:
            return poly
        if len(poly) < 3:
            return None
        frac += 0.01
    return None


def _refine(points: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """Fit each side to its border pixels and push it out to the pixel edge."""
    pts = points.astype(np.float64)
    centroid = corners.mean(axis=0)
    lines = []
    for k in range(3):
        a, b = corners[k], corners[(k + 1) % 3]
        ab = b - a
        L = float(np.hypot(*ab))
        u = ab / L
        t = (pts - a) @ u
        off = np.abs((pts - a) @ np.array([-u[1], u[0]]))
        sel = (t > 0.15 * L) & (t < 0.85 * L) & (off < max(2.0, 0.05 * L))
        if sel.sum() < 2:
            lines.append((a, u))
            continue
        p0, d = fit_line(pts[sel])
        n = np.array([-d[1], d[0]])
        if (p0 - centroid) @ n < 0:
            n = -n
        # border pixel centres sit on average half a lattice step inside the true edge
        lines.append((p0 + 0.5 * max(abs(n[0]), abs(n[1])) * n, d))
    out = []
    for k in range(3):
        (p1, d1), (p2, d2) = lines[k - 1], lines[k]
        x = line_intersection(p1, d1, p2, d2)
        out.append(corners[k] if x is None else x)
    return np.array(out)


def _order(vertices: np.ndarray) -> np.ndarray:
    # screen counter-clockwise == positive area once y is flipped up
    flipped = vertices * np.array([1.0, -1.0])
    if polygon_area(flipped) < 0:
        vertices = vertices[::-1]
    top = int(np.argmin(vertices[:, 1] + 1e-9 * vertices[:, 0]))
    return np.roll(vertices, -top, axis=0)


def triangle_candidate(c: Contour) -> np.ndarray | None:
    """Refined triangle vertices if the contour passes the reference-node tests."""
    if c.is_hole or len(c) < 12:
        return None
    corners = _three_corners(c.points.astype(np.float64))
    if corners is None:
        return None
    verts = _refine(c.points, corners)
    # Pick's theorem on the traced lattice polygon recovers the inked pixel count,
    # an unbiased estimate of the true area; rescale the fitted corners to match it.
    n_border = len(np.unique(c.points, axis=0))
    ink_area = contour_area(c) + n_border / 2.0 + 1.0
    fitted = abs(polygon_area(verts))
    if fitted > 0:
        centre = verts.mean(axis=0)
        verts = centre + (verts - centre) * np.sqrt(ink_area / fitted)
    sides = [float(np.hypot(*(verts[(i + 1) % 3] - verts[i]))) for i in range(3)]
    mean = sum(sides) / 3.0
    if mean < MIN_SIDE_PX or any(abs(s - mean) > EQUILATERAL_TOL * mean for s in sides):
        return None
    if not 0.85 <= contour_area(c) / fitted <= 1.05:
        return None
    return _order(verts)


def find_reference(cs: ContourSet) -> ReferenceNode:
    found = []
    for i in cs.outer_ids():
        verts = triangle_candidate(cs[i])
        if verts is not None:
            found.append((i, verts))
    if not found:
        raise ReferenceNotFound("no equilateral reference triangle in the drawing")
    if len(found) > 1:
        raise AmbiguousReference(
            f"{len(found)} reference-triangle candidates (contours {[i for i, _ in found]})"
        )
    i, verts = found[0]
    sides = [float(np.hypot(*(verts[(k + 1) % 3] - verts[k]))) for k in range(3)]
    verts = verts + PIXEL_CENTRE
    return ReferenceNode(
        vertices=tuple((float(x), float(y)) for x, y in verts),
        side_px=sum(sides) / 3.0,
        contour_id=i,
    )


def compute_scale(ref: ReferenceNode) -> float:
    """Millimetres per pixel implied by the reference node."""
    return ref.side_mm / ref.side_px
