"""Duct recognition, connectivity and fitting classification.

All geometry here is in pixel-index coordinates, where a pixel's centre is
its integer (x, y). Conversion to millimetres adds PIXEL_CENTRE so that
object positions live in the continuous drawing frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contour import Contour, ContourSet, contour_area, perimeter
from .geometry import RotatedRect, min_area_rect
from .objects import CROSS, DUCT, ELBOW, OTHER, TEE, HvacObject, Port
from .raster import PIXEL_CENTRE

DEFAULT_THICK_THRESHOLD_MM = 0.375  # halfway between the 0.15 mm and 0.6 mm line weights
DEFAULT_PROXIMITY_FACTOR = 1.5
DEFAULT_COLLINEAR_DEG = 5.0
RECTANGULARITY = 0.9


class DegenerateContour(ValueError):
    pass


@dataclass(frozen=True)
class DuctShape:
    corners: np.ndarray  # (4, 2); edge 0->1 runs along the axis
    midpoints: np.ndarray  # (4, 2); midpoints[i] bisects corners[i], corners[i+1]
    center: np.ndarray
    axis: np.ndarray  # unit vector along the long edge
    length_px: float
    width_px: float

    @property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Short-edge midpoints, ordered (-axis end, +axis end)."""
        return self.midpoints[3], self.midpoints[1]

    def nine_points(self) -> np.ndarray:
        return np.vstack([self.corners, self.midpoints, self.center[None, :]])


@dataclass(frozen=True)
class DuctEnd:
    duct: int
    end: int  # 0 for the -axis end, 1 for the +axis end
    point: tuple[float, float]
    direction: tuple[float, float]  # unit vector pointing out of the duct
    width_px: float


@dataclass(frozen=True)
class Junction:
    location: tuple[float, float]
    incident_endpoints: tuple[DuctEnd, ...]
    gap_px: float


def to_mm(p, mm_per_px: float) -> tuple[float, float]:
    """Pixel-index point to drawing-frame millimetres."""
    return (float(p[0]) + PIXEL_CENTRE) * mm_per_px, (float(p[1]) + PIXEL_CENTRE) * mm_per_px


def _canonical_axis(u: np.ndarray) -> np.ndarray:
    u = u / np.hypot(*u)
    if u[0] < -1e-9 or (abs(u[0]) <= 1e-9 and u[1] < 0):
        u = -u
    return u


def duct_from_rect(rect: RotatedRect) -> DuctShape:
    """DuctShape whose first edge lies along the rectangle's longer side."""
    u = np.asarray(rect.edge_dir, dtype=np.float64)
    a, b = rect.size
    if b > a:
        u = np.array([-u[1], u[0]])
        a, b = b, a
    u = _canonical_axis(u)
    v = np.array([-u[1], u[0]])
    c = np.asarray(rect.center, dtype=np.float64)
    corners = np.array(
        [c - a / 2 * u - b / 2 * v, c + a / 2 * u - b / 2 * v, c + a / 2 * u + b / 2 * v, c - a / 2 * u + b / 2 * v]
    )
    mids = (corners + np.roll(corners, -1, axis=0)) / 2.0
    return DuctShape(corners, mids, c, u, float(a), float(b))


def duct_from_ends(p0, p1, width_px: float) -> DuctShape:
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    d = p1 - p0
    length = float(np.hypot(*d))
    u = d / length
    c = (p0 + p1) / 2.0
    if length >= width_px:
        return duct_from_rect(RotatedRect(tuple(c), (length, width_px), tuple(u)))
    return duct_from_rect(RotatedRect(tuple(c), (width_px, length), (-u[1], u[0])))


def rectangularity(c: Contour) -> float:
    """Contour area over the area of its minimum-area rectangle."""
    if len(c) < 4:
        return 0.0
    rect = min_area_rect(c.points)
    if rect.area <= 0:
        return 0.0
    return abs(contour_area(c)) / rect.area


def _filled_pad(c: Contour, rect: RotatedRect) -> float:
    """Uniform growth that makes the rectangle's area equal the inked pixel count.

    Pick's theorem on the traced polygon gives the ink count. Axis-aligned
    shapes need a full pixel; rotated ones much less, since their border
    pixel centres hug the true edge.
    """
    ink = abs(contour_area(c)) + len(np.unique(c.points, axis=0)) / 2.0 + 1.0
    a, b = rect.size
    disc = (a + b) ** 2 - 4.0 * (a * b - ink)
    return max(0.0, (-(a + b) + math.sqrt(max(disc, 0.0))) / 2.0)


def stroke_thickness(c: Contour, cs: ContourSet, mm_per_px: float) -> float:
    """Line weight of an outer contour's stroke, in mm at the given scale.

    Rings use ink area over mean boundary length. Filled rectangular shapes
    use the short side of their minimum-area rectangle; other filled shapes
    use twice the area over the perimeter. Contours trace pixel centres, so
    the missing border is added back in each case.
    """
    if c.is_hole:
        raise ValueError("stroke_thickness expects an outer contour")
    if len(c) < 4:
        raise DegenerateContour(f"contour with {len(c)} points has no measurable stroke")
    holes = [cs[k] for k in c.children if cs[k].is_hole]
    outer_area = abs(contour_area(c))
    p_outer = perimeter(c.points)
    if holes:
        ink = outer_area - sum(abs(contour_area(h)) for h in holes)
        boundary = p_outer + sum(perimeter(h.points) for h in holes)
        w = ink / (boundary / 2.0) + 1.0
    else:
        rect = min_area_rect(c.points)
        if rect.area > 0 and outer_area / rect.area >= RECTANGULARITY:
            w = min(rect.size) + _filled_pad(c, rect)
        else:
            w = 2.0 * outer_area / p_outer + 1.0
    return w * mm_per_px


def filter_hvac(
    cs: ContourSet, mm_per_px: float, thick_threshold: float = DEFAULT_THICK_THRESHOLD_MM
) -> ContourSet:
    """Keep outer contours drawn at HVAC line weight, together with their holes."""
    keep = []
    for i in cs.outer_ids():
        c = cs[i]
        try:
            w = stroke_thickness(c, cs, mm_per_px)
        except DegenerateContour:
            continue
        if w >= thick_threshold:
            keep.append(i)
            keep.extend(k for k in c.children if cs[k].is_hole)
    return cs.subset(keep)


def fit_duct(c: Contour, holes: list[Contour] | None = None, filled: bool = False) -> DuctShape:
    """Nine-point duct geometry from the minimum-area rectangle of a contour.

    With ``holes`` (an outlined duct) the rectangle is the mean of the outer
    and inner borders, i.e. the stroke centre line. ``filled`` grows a solid
    shape from its border pixel centres out to the inked area.
    """
    if len(c) < 4:
        raise DegenerateContour("too few points for a rectangle")
    rect = min_area_rect(c.points)
    if holes:
        inner = min_area_rect(np.vstack([h.points for h in holes]))
        u = np.asarray(rect.edge_dir)
        ui = np.asarray(inner.edge_dir)
        # align the inner rectangle's size with the outer one's edge directions
        isize = inner.size if abs(u @ ui) >= abs(u @ np.array([-ui[1], ui[0]])) else inner.size[::-1]
        center = (np.asarray(rect.center) + np.asarray(inner.center)) / 2.0
        size = ((rect.size[0] + isize[0]) / 2.0, (rect.size[1] + isize[1]) / 2.0)
        rect = RotatedRect(tuple(center), size, rect.edge_dir)
    elif filled:
        pad = _filled_pad(c, rect)
        rect = RotatedRect(rect.center, (rect.size[0] + pad, rect.size[1] + pad), rect.edge_dir)
    return duct_from_rect(rect)


def duct_ends(ducts: list[DuctShape]) -> list[DuctEnd]:
    ends = []
    for i, d in enumerate(ducts):
        for k, p in enumerate(d.endpoints):
            direction = d.axis if k == 1 else -d.axis
            ends.append(DuctEnd(i, k, (float(p[0]), float(p[1])), (float(direction[0]), float(direction[1])), d.width_px))
    return ends


def _is_continuation(a: DuctEnd, b: DuctEnd, collinear_deg: float) -> bool:
    da, db = np.asarray(a.direction), np.asarray(b.direction)
    if da @ db > -math.cos(math.radians(collinear_deg)):
        return False
    # the gap must run along the shared axis, not sideways
    gap = np.asarray(b.point) - np.asarray(a.point)
    lateral = abs(gap @ np.array([-da[1], da[0]]))
    return lateral <= 0.5 * max(a.width_px, b.width_px) and gap @ da >= -0.5 * max(a.width_px, b.width_px)


def _group_ends(ducts, mm_per_px, proximity_mm, proximity_factor):
    ends = duct_ends(ducts)
    parent = list(range(len(ends)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(ends)):
        for j in range(i + 1, len(ends)):
            a, b = ends[i], ends[j]
            if a.duct == b.duct:
                continue
            if proximity_mm is not None:
                limit = proximity_mm / mm_per_px
            else:
                limit = proximity_factor * max(a.width_px, b.width_px)
            if math.dist(a.point, b.point) <= limit:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(len(ends)):
        groups.setdefault(find(i), []).append(i)
    return ends, [sorted(g) for g in groups.values() if len(g) > 1]


def _junction(members: list[DuctEnd]) -> Junction:
    loc = np.array([m.point for m in members]).mean(axis=0)
    gap = min(math.dist(members[i].point, members[j].point) for i in range(len(members)) for j in range(i + 1, len(members)))
    return Junction((float(loc[0]), float(loc[1])), tuple(members), float(gap))


def link_ducts(
    ducts: list[DuctShape],
    mm_per_px: float = 1.0,
    proximity_mm: float | None = None,
    proximity_factor: float = DEFAULT_PROXIMITY_FACTOR,
    collinear_deg: float = DEFAULT_COLLINEAR_DEG,
) -> tuple[list[Junction], list[tuple[DuctEnd, DuctEnd]]]:
    """Group nearby duct ends into junctions and straight continuations."""
    ends, groups = _group_ends(ducts, mm_per_px, proximity_mm, proximity_factor)
    junctions, continuations = [], []
    for g in groups:
        members = [ends[i] for i in g]
        if len(members) == 2 and _is_continuation(members[0], members[1], collinear_deg):
            continuations.append((members[0], members[1]))
        else:
            junctions.append(_junction(members))
    return junctions, continuations


def infer_connectivity(
    ducts: list[DuctShape],
    mm_per_px: float = 1.0,
    proximity_mm: float | None = None,
    proximity_factor: float = DEFAULT_PROXIMITY_FACTOR,
    collinear_deg: float = DEFAULT_COLLINEAR_DEG,
) -> list[Junction]:
    return link_ducts(ducts, mm_per_px, proximity_mm, proximity_factor, collinear_deg)[0]


def merge_continuous(
    ducts: list[DuctShape], continuations: list[tuple[DuctEnd, DuctEnd]]
) -> tuple[list[DuctShape], list[int]]:
    """Fuse chains of collinear pieces; returns merged ducts and a piece -> chain map."""
    parent = list(range(len(ducts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in continuations:
        parent[find(a.duct)] = find(b.duct)
    roots: dict[int, int] = {}
    chain_of = []
    for i in range(len(ducts)):
        r = find(i)
        if r not in roots:
            roots[r] = len(roots)
        chain_of.append(roots[r])
    merged = []
    for r, idx in sorted(roots.items(), key=lambda kv: kv[1]):
        members = [i for i in range(len(ducts)) if find(i) == r]
        if len(members) == 1:
            merged.append(ducts[members[0]])
            continue
        u = ducts[members[0]].axis
        pts = np.vstack([np.array(ducts[i].endpoints) for i in members])
        t = pts @ u
        p0, p1 = pts[int(np.argmin(t))], pts[int(np.argmax(t))]
        width = float(np.mean([ducts[i].width_px for i in members]))
        # keep the ends on the common centre line
        c = np.mean([ducts[i].center for i in members], axis=0)
        v = np.array([-u[1], u[0]])
        off = (c @ v) * v
        p0 = p0 - (p0 @ v) * v + off
        p1 = p1 - (p1 @ v) * v + off
        merged.append(duct_from_ends(p0, p1, width))
    return merged, chain_of


def classify_fitting(j: Junction, mm_per_px: float = 1.0, object_id: int = -1) -> HvacObject:
    """Elbow, Tee or Cross by how many other duct ends meet the first one."""
    n = len(j.incident_endpoints)
    duct_ids = tuple(e.duct for e in j.incident_endpoints)
    center = to_mm(j.location, mm_per_px)
    widest = max(j.incident_endpoints, key=lambda e: (e.width_px, -e.duct))
    if n > 4 or n < 2:
        return HvacObject(
            id=object_id,
            kind=OTHER,
            center_mm=center,
            width_mm=widest.width_px * mm_per_px,
            notes=(f"unsupported manifold with {n} incident duct ends",),
        )
    kind = {1: ELBOW, 2: TEE, 3: CROSS}[n - 1]
    ports = tuple(
        Port(to_mm(e.point, mm_per_px), (-e.direction[0], -e.direction[1]))
        for e in j.incident_endpoints
    )
    return HvacObject(
        id=object_id,
        kind=kind,
        center_mm=center,
        width_mm=widest.width_px * mm_per_px,
        connections=duct_ids,
        ports=ports,
    )


def duct_object(d: DuctShape, mm_per_px: float, object_id: int = -1) -> HvacObject:
    return HvacObject(
        id=object_id,
        kind=DUCT,
        center_mm=to_mm(d.center, mm_per_px),
        axis=(float(d.axis[0]), float(d.axis[1])),
        length_mm=d.length_px * mm_per_px,
        width_mm=d.width_px * mm_per_px,
        outline_mm=tuple(to_mm(p, mm_per_px) for p in d.corners),
    )


def other_object(c: Contour, holes: list[Contour], mm_per_px: float, object_id: int = -1) -> HvacObject:
    """Non-duct HVAC symbol, located by the bounding box of its stroke centre line."""
    x0, y0, x1, y1 = (float(v) for v in c.bbox())
    if holes:
        hb = np.array([h.bbox() for h in holes], dtype=np.float64)
        hx0, hy0 = hb[:, 0].min(), hb[:, 1].min()
        hx1, hy1 = hb[:, 2].max(), hb[:, 3].max()
        x0, y0, x1, y1 = (x0 + hx0) / 2, (y0 + hy0) / 2, (x1 + hx1) / 2, (y1 + hy1) / 2
    else:
        # pixel centres to pixel edges
        x0, y0, x1, y1 = x0 - 0.5, y0 - 0.5, x1 + 0.5, y1 + 0.5
    w = max(x1 - x0, 1.0) * mm_per_px
    h = max(y1 - y0, 1.0) * mm_per_px
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    return HvacObject(
        id=object_id,
        kind=OTHER,
        center_mm=to_mm(((x0 + x1) / 2, (y0 + y1) / 2), mm_per_px),
        length_mm=max(w, h),
        width_mm=min(w, h),
        outline_mm=tuple(to_mm(p, mm_per_px) for p in corners),
    )
