"""Synthetic HVAC plan drawings with exact ground truth.

Geometry is authored in drawing millimetres and rasterised at
``scale_mm_per_px``. Line weights and lettering are plotted quantities and
use ``plot_mm_per_px`` instead, so a 0.6 mm HVAC line is 6 px wide at the
default 0.1 mm/px regardless of the drawing scale.

Pixel ``i`` covers [i, i+1) in the continuous frame and is inked when its
centre lies inside a shape.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from shapely.geometry import Point, Polygon, box
from shapely.geometry import LineString

from .calibrate import REFERENCE_SIDE_MM
from .dimtext import format_dimension
from .font import CANONICAL_CELL_PX, render_text, text_extent
from .geometry import nearest_point_to_lines
from .objects import CROSS, DUCT, ELBOW, OTHER, TEE, HvacObject, Port
from .raster import BinaryImage

HVAC_LINE_MM = 0.6
THIN_LINE_MM = 0.15
DEFAULT_PLOT_MM_PER_PX = 0.1
DEFAULT_CANVAS = (2000, 2000)
LATTICE_MM = 400.0
DUCT_WIDTHS = (100, 125, 150)
DUCT_HEIGHTS = (100, 125, 150, 200, 250)
# object counts of the reference survey: Duct, Elbow, Tee, Other
SURVEY_COUNTS = {DUCT: 33723, ELBOW: 8908, TEE: 12089, OTHER: 8909}
PROFILES = ("clean", "noisy")

_EPS = 1e-7  # breaks ties for pixel centres lying exactly on a shape edge


class LayoutError(ValueError):
    pass


@dataclass
class DuctSpec:
    center_mm: tuple[float, float]
    angle_deg: float
    length_mm: float
    width_mm: float
    height_mm: float
    annotate: bool = True
    label_side: int = 1  # which long edge carries the label
    breaks: list[tuple[float, float]] = field(default_factory=list)  # (offset from centre, gap) mm
    stroke_px: float | None = None

    @property
    def axis(self) -> np.ndarray:
        a = math.radians(self.angle_deg)
        return np.array([math.cos(a), math.sin(a)])

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center_mm, dtype=float)
        return c - self.axis * self.length_mm / 2, c + self.axis * self.length_mm / 2

    def corners(self, grow: float = 0.0) -> np.ndarray:
        c = np.asarray(self.center_mm, dtype=float)
        u = self.axis
        v = np.array([-u[1], u[0]])
        a = self.length_mm / 2 + grow
        b = self.width_mm / 2 + grow
        return np.array([c - a * u - b * v, c + a * u - b * v, c + a * u + b * v, c - a * u + b * v])

    def pieces(self) -> list[tuple[float, float]]:
        """Drawn sub-spans as (start, end) offsets along the axis from the centre."""
        spans = []
        lo = -self.length_mm / 2
        for off, gap in sorted(self.breaks):
            spans.append((lo, off - gap / 2))
            lo = off + gap / 2
        spans.append((lo, self.length_mm / 2))
        return spans


@dataclass
class OtherSpec:
    shape: str  # "circle" or "octagon"
    center_mm: tuple[float, float]
    size_mm: float  # diameter, or flat-to-flat width
    stroke_px: float | None = None

    def polygon(self, grow: float = 0.0) -> Polygon:
        if self.shape == "circle":
            return Point(self.center_mm).buffer(self.size_mm / 2 + grow, 64)
        ap = self.size_mm / 2 + grow
        r = ap / math.cos(math.pi / 8)
        cx, cy = self.center_mm
        return Polygon([(cx + r * math.cos(math.pi / 8 + k * math.pi / 4), cy + r * math.sin(math.pi / 8 + k * math.pi / 4)) for k in range(8)])


@dataclass
class ClutterSpec:
    shape: str  # "line", "rect" or "circle"
    points_mm: list[tuple[float, float]]  # line: two ends; rect: two opposite corners; circle: centre
    radius_mm: float = 0.0

    def geometry(self):
        if self.shape == "line":
            return LineString(self.points_mm)
        if self.shape == "rect":
            (x0, y0), (x1, y1) = self.points_mm
            return box(min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1)).exterior
        return Point(self.points_mm[0]).buffer(self.radius_mm, 64).exterior


@dataclass
class FittingSpec:
    node_mm: tuple[float, float]
    ducts: list[int]


@dataclass
class Layout:
    ducts: list[DuctSpec] = field(default_factory=list)
    reference_mm: tuple[float, float] = (400.0, 400.0)  # triangle centroid
    others: list[OtherSpec] = field(default_factory=list)
    clutter: list[ClutterSpec] = field(default_factory=list)
    speckles: list[tuple[float, float, float]] = field(default_factory=list)  # x, y, radius in px
    fittings: list[FittingSpec] | None = None
    scale_mm_per_px: float = 1.0
    plot_mm_per_px: float = DEFAULT_PLOT_MM_PER_PX
    canvas_px: tuple[int, int] = DEFAULT_CANVAS  # width, height
    label_cell_px: float = CANONICAL_CELL_PX

    @property
    def hvac_stroke_px(self) -> float:
        return round(HVAC_LINE_MM / self.plot_mm_per_px)

    @property
    def thin_stroke_px(self) -> float:
        return max(1, round(THIN_LINE_MM / self.plot_mm_per_px))

    @property
    def extent_mm(self) -> tuple[float, float]:
        return self.canvas_px[0] * self.scale_mm_per_px, self.canvas_px[1] * self.scale_mm_per_px

    def reference_vertices_mm(self) -> np.ndarray:
        s = REFERENCE_SIDE_MM
        h = s * math.sqrt(3) / 2
        cx, cy = self.reference_mm
        return np.array([[cx, cy - 2 * h / 3], [cx - s / 2, cy + h / 3], [cx + s / 2, cy + h / 3]])

    def label_box_mm(self, i: int) -> tuple[float, float, float, float] | None:
        """Text block (x0, y0, x1, y1) in mm beside duct ``i``'s long edge."""
        d = self.ducts[i]
        if not d.annotate:
            return None
        tw, th = text_extent(format_dimension(d.width_mm, d.height_mm), self.label_cell_px)
        tw *= self.scale_mm_per_px
        th *= self.scale_mm_per_px
        u = d.axis
        v = np.array([-u[1], u[0]]) * (1 if d.label_side >= 0 else -1)
        half_v = (abs(v[0]) * tw + abs(v[1]) * th) / 2
        c = np.asarray(d.center_mm) + v * (d.width_mm / 2 + th + half_v)
        return (c[0] - tw / 2, c[1] - th / 2, c[0] + tw / 2, c[1] + th / 2)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Layout":
        d = dict(d)
        d["ducts"] = [DuctSpec(**{**x, "center_mm": tuple(x["center_mm"]), "breaks": [tuple(b) for b in x.get("breaks", [])]}) for x in d.get("ducts", [])]
        d["others"] = [OtherSpec(**{**x, "center_mm": tuple(x["center_mm"])}) for x in d.get("others", [])]
        d["clutter"] = [ClutterSpec(**{**x, "points_mm": [tuple(p) for p in x["points_mm"]]}) for x in d.get("clutter", [])]
        d["speckles"] = [tuple(s) for s in d.get("speckles", [])]
        if d.get("fittings") is not None:
            d["fittings"] = [FittingSpec(tuple(f["node_mm"]), list(f["ducts"])) for f in d["fittings"]]
        for key in ("reference_mm", "canvas_px"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class LabelTruth:
    object_id: int
    text: str
    bbox_px: tuple[int, int, int, int]
    glyph_boxes_px: list[tuple[int, int, int, int]]


@dataclass
class GroundTruth:
    objects: list[HvacObject]
    labels: list[LabelTruth]
    scale_mm_per_px: float
    plot_mm_per_px: float
    canvas_px: tuple[int, int]
    reference_vertices_px: list[tuple[float, float]]
    reference_side_px: float
    strokes_px: dict[int, float]
    ink_pixels: int

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for o in self.objects:
            out[o.kind] = out.get(o.kind, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {
            "scale_mm_per_px": self.scale_mm_per_px,
            "plot_mm_per_px": self.plot_mm_per_px,
            "canvas_px": list(self.canvas_px),
            "reference": {"vertices_px": [list(v) for v in self.reference_vertices_px], "side_px": self.reference_side_px},
            "objects": [o.to_dict() for o in self.objects],
            "labels": [
                {"object_id": lb.object_id, "text": lb.text, "bbox_px": list(lb.bbox_px), "glyph_boxes_px": [list(g) for g in lb.glyph_boxes_px]}
                for lb in self.labels
            ],
            "strokes_px": {str(k): v for k, v in self.strokes_px.items()},
            "ink_pixels": self.ink_pixels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(
            objects=[HvacObject.from_dict(o) for o in d["objects"]],
            labels=[LabelTruth(lb["object_id"], lb["text"], tuple(lb["bbox_px"]), [tuple(g) for g in lb["glyph_boxes_px"]]) for lb in d.get("labels", [])],
            scale_mm_per_px=float(d["scale_mm_per_px"]),
            plot_mm_per_px=float(d.get("plot_mm_per_px", DEFAULT_PLOT_MM_PER_PX)),
            canvas_px=tuple(d.get("canvas_px", DEFAULT_CANVAS)),
            reference_vertices_px=[tuple(v) for v in d.get("reference", {}).get("vertices_px", [])],
            reference_side_px=float(d.get("reference", {}).get("side_px", 0.0)),
            strokes_px={int(k): float(v) for k, v in d.get("strokes_px", {}).items()},
            ink_pixels=int(d.get("ink_pixels", 0)),
        )


# ---------------------------------------------------------------------------
# rasterisation


def _grid(canvas, x0, y0, x1, y1):
    h, w = canvas.shape
    c0, c1 = max(int(math.floor(x0)) - 1, 0), min(int(math.ceil(x1)) + 1, w - 1)
    r0, r1 = max(int(math.floor(y0)) - 1, 0), min(int(math.ceil(y1)) + 1, h - 1)
    if c1 < c0 or r1 < r0:
        return None
    xs = np.arange(c0, c1 + 1) + 0.5 + _EPS
    ys = np.arange(r0, r1 + 1) + 0.5 + _EPS
    return (slice(r0, r1 + 1), slice(c0, c1 + 1)), xs[None, :], ys[:, None]


def _in_convex(xs, ys, poly: np.ndarray) -> np.ndarray:
    area = 0.5 * float(np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - poly[:, 1] * np.roll(poly[:, 0], -1)))
    sign = 1.0 if area >= 0 else -1.0
    inside = np.ones(np.broadcast_shapes(xs.shape, ys.shape), dtype=bool)
    for k in range(len(poly)):
        a, b = poly[k], poly[(k + 1) % len(poly)]
        cr = (b[0] - a[0]) * (ys - a[1]) - (b[1] - a[1]) * (xs - a[0])
        inside &= sign * cr >= 0
    return inside


def fill_convex(canvas: np.ndarray, poly_px: np.ndarray) -> None:
    poly_px = np.asarray(poly_px, dtype=float)
    g = _grid(canvas, *poly_px.min(axis=0), *poly_px.max(axis=0))
    if g is None:
        return
    sl, xs, ys = g
    canvas[sl] |= _in_convex(xs, ys, poly_px)


def fill_ring(canvas: np.ndarray, outer_px: np.ndarray, inner_px: np.ndarray | None) -> None:
    outer_px = np.asarray(outer_px, dtype=float)
    g = _grid(canvas, *outer_px.min(axis=0), *outer_px.max(axis=0))
    if g is None:
        return
    sl, xs, ys = g
    mask = _in_convex(xs, ys, outer_px)
    if inner_px is not None:
        mask &= ~_in_convex(xs, ys, np.asarray(inner_px, dtype=float))
    canvas[sl] |= mask


def fill_annulus(canvas: np.ndarray, center_px, r_out: float, r_in: float) -> None:
    cx, cy = center_px
    g = _grid(canvas, cx - r_out, cy - r_out, cx + r_out, cy + r_out)
    if g is None:
        return
    sl, xs, ys = g
    d2 = (xs - cx) ** 2 + (ys - cy) ** 2
    canvas[sl] |= (d2 <= r_out**2) & (d2 > r_in**2)


def _rect(c, u, a, b) -> np.ndarray:
    v = np.array([-u[1], u[0]])
    return np.array([c - a * u - b * v, c + a * u - b * v, c + a * u + b * v, c - a * u + b * v])


def _octagon(c, apothem: float) -> np.ndarray:
    r = apothem / math.cos(math.pi / 8)
    return np.array([[c[0] + r * math.cos(math.pi / 8 + k * math.pi / 4), c[1] + r * math.sin(math.pi / 8 + k * math.pi / 4)] for k in range(8)])


def _draw_segment(canvas, p0, p1, width_px):
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    d = p1 - p0
    n = float(np.hypot(*d))
    if n == 0:
        return
    u = d / n
    fill_convex(canvas, _rect((p0 + p1) / 2, u, n / 2 + width_px / 2, width_px / 2))


# ---------------------------------------------------------------------------
# ground truth


def _widest(ducts: list[DuctSpec], ids: list[int]) -> int:
    return min(ids, key=lambda i: (-ducts[i].width_mm, -ducts[i].height_mm, i))


def derive_fittings(ducts: list[DuctSpec], collinear_deg: float = 5.0) -> list[FittingSpec]:
    """Fittings implied by duct ends that lie within one duct width of each other."""
    ends = []
    for i, d in enumerate(ducts):
        for p in d.endpoints():
            ends.append((i, p))
    parent = list(range(len(ends)))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for a in range(len(ends)):
        for b in range(a + 1, len(ends)):
            ia, pa = ends[a]
            ib, pb = ends[b]
            if ia != ib and np.hypot(*(pa - pb)) <= max(ducts[ia].width_mm, ducts[ib].width_mm):
                parent[find(a)] = find(b)
    groups: dict[int, list[int]] = {}
    for k in range(len(ends)):
        groups.setdefault(find(k), []).append(k)
    out = []
    for g in groups.values():
        if len(g) < 2:
            continue
        ids = [ends[k][0] for k in g]
        if len(g) == 2:
            ua, ub = ducts[ids[0]].axis, ducts[ids[1]].axis
            if abs(ua @ ub) >= math.cos(math.radians(collinear_deg)):
                continue
        pts = [ends[k][1] for k in g]
        dirs = [ducts[i].axis for i in ids]
        node = nearest_point_to_lines(pts, dirs)
        if node is None:
            node = np.mean(pts, axis=0)
        out.append(FittingSpec((float(node[0]), float(node[1])), ids))
    out.sort(key=lambda f: (f.node_mm[1], f.node_mm[0]))
    return out


def truth_objects(layout: Layout) -> list[HvacObject]:
    ducts = layout.ducts
    fittings = layout.fittings if layout.fittings is not None else derive_fittings(ducts)
    objs: list[HvacObject] = []
    conns: dict[int, list[int]] = {i: [] for i in range(len(ducts))}
    fit_objs = []
    for k, f in enumerate(fittings):
        fid = len(ducts) + k
        kind = {2: ELBOW, 3: TEE, 4: CROSS}.get(len(f.ducts), OTHER)
        node = np.asarray(f.node_mm)
        ports, nears = [], []
        for i in f.ducts:
            conns[i].append(fid)
            p0, p1 = ducts[i].endpoints()
            near, far = (p0, p1) if np.hypot(*(p0 - node)) <= np.hypot(*(p1 - node)) else (p1, p0)
            out = (near - far) / ducts[i].length_mm
            nears.append(near)
            ports.append(Port((float(near[0]), float(near[1])), (float(-out[0]), float(-out[1]))))
        # a fitting is located at the centroid of the duct ends it joins
        centre = np.mean(nears, axis=0)
        w = ducts[_widest(ducts, f.ducts)]
        fit_objs.append(
            HvacObject(
                id=fid,
                kind=kind,
                center_mm=(float(centre[0]), float(centre[1])),
                width_mm=float(w.width_mm),
                height_mm=float(w.height_mm),
                connections=tuple(f.ducts) if kind != OTHER else (),
                ports=tuple(ports),
            )
        )
    for i, d in enumerate(ducts):
        u = d.axis
        if u[0] < -1e-9 or (abs(u[0]) <= 1e-9 and u[1] < 0):
            u = -u
        objs.append(
            HvacObject(
                id=i,
                kind=DUCT,
                center_mm=(float(d.center_mm[0]), float(d.center_mm[1])),
                axis=(float(u[0]), float(u[1])),
                length_mm=float(d.length_mm),
                width_mm=float(d.width_mm),
                height_mm=float(d.height_mm) if d.annotate else None,
                connections=tuple(conns[i]),
                outline_mm=tuple(tuple(map(float, p)) for p in d.corners()),
            )
        )
    objs.extend(fit_objs)
    base = len(objs)
    for k, o in enumerate(layout.others):
        x0, y0, x1, y1 = o.polygon().bounds
        objs.append(
            HvacObject(
                id=base + k,
                kind=OTHER,
                center_mm=(float(o.center_mm[0]), float(o.center_mm[1])),
                length_mm=float(o.size_mm),
                width_mm=float(o.size_mm),
                outline_mm=((x0, y0), (x1, y0), (x1, y1), (x0, y1)),
            )
        )
    return objs


# ---------------------------------------------------------------------------
# layout checks and rendering


def _label_polys(layout: Layout) -> dict[int, Polygon]:
    out = {}
    for i in range(len(layout.ducts)):
        b = layout.label_box_mm(i)
        if b is not None:
            out[i] = box(*b)
    return out


def validate_layout(layout: Layout, label_clearance_mm: float = 0.0) -> None:
    """Raise LayoutError when the layout cannot be rendered faithfully."""
    W, H = layout.extent_mm
    frame = box(0, 0, W, H)
    tri = Polygon(layout.reference_vertices_mm())
    if not frame.contains(tri):
        raise LayoutError("reference node lies outside the canvas")
    for i, d in enumerate(layout.ducts):
        if min(d.length_mm, d.width_mm, d.height_mm) <= 0:
            raise LayoutError(f"duct {i}: dimensions must be positive")
        poly = Polygon(d.corners())
        if not frame.contains(poly):
            raise LayoutError(f"duct {i} lies outside the canvas")
        if poly.intersects(tri):
            raise LayoutError(f"duct {i} overlaps the reference node")
    # outlines without a clear gap between them would merge into a single shape
    s = layout.scale_mm_per_px
    reach = [((d.stroke_px if d.stroke_px is not None else layout.hvac_stroke_px) / 2 + 1) * s for d in layout.ducts]
    polys = [Polygon(d.corners()) for d in layout.ducts]
    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            if polys[i].distance(polys[j]) <= reach[i] + reach[j]:
                raise LayoutError(f"ducts {i} and {j} touch")
    labels = _label_polys(layout)
    items = list(labels.items())
    for a in range(len(items)):
        ia, pa = items[a]
        if not frame.contains(pa):
            raise LayoutError(f"label of duct {ia} lies outside the canvas")
        if pa.distance(tri) <= label_clearance_mm:
            raise LayoutError(f"label of duct {ia} overlaps the reference node")
        for b in range(a + 1, len(items)):
            ib, pb = items[b]
            if pa.distance(pb) <= label_clearance_mm:
                raise LayoutError(f"labels of ducts {ia} and {ib} overlap")


def render(layout: Layout, validate: bool = True) -> tuple[BinaryImage, GroundTruth]:
    """Rasterise a layout and report exactly what was drawn."""
    if validate:
        validate_layout(layout)
    s = layout.scale_mm_per_px
    W, H = layout.canvas_px
    canvas = np.zeros((H, W), dtype=bool)

    tri_px = layout.reference_vertices_mm() / s
    fill_convex(canvas, tri_px)

    objects = truth_objects(layout)
    strokes: dict[int, float] = {}
    for i, d in enumerate(layout.ducts):
        st = d.stroke_px if d.stroke_px is not None else layout.hvac_stroke_px
        strokes[i] = st
        u = d.axis
        c = np.asarray(d.center_mm) / s
        b = d.width_mm / s / 2
        for lo, hi in d.pieces():
            pc = c + u * ((lo + hi) / 2) / s
            a = (hi - lo) / s / 2
            inner = _rect(pc, u, a - st / 2, b - st / 2) if min(a, b) > st / 2 else None
            fill_ring(canvas, _rect(pc, u, a + st / 2, b + st / 2), inner)

    base = len(objects) - len(layout.others)
    for k, o in enumerate(layout.others):
        st = o.stroke_px if o.stroke_px is not None else layout.hvac_stroke_px
        strokes[base + k] = st
        c = np.asarray(o.center_mm) / s
        half = o.size_mm / s / 2
        if o.shape == "circle":
            fill_annulus(canvas, c, half + st / 2, half - st / 2)
        else:
            fill_ring(canvas, _octagon(c, half + st / 2), _octagon(c, half - st / 2))

    labels = []
    for i, d in enumerate(layout.ducts):
        bm = layout.label_box_mm(i)
        if bm is None:
            continue
        text = format_dimension(d.width_mm, d.height_mm)
        glyphs = render_text(canvas, text, bm[0] / s, bm[1] / s, layout.label_cell_px)
        bbox = (glyphs[0][0], glyphs[0][1], glyphs[-1][2], glyphs[-1][3])
        labels.append(LabelTruth(i, text, bbox, glyphs))

    thin = layout.thin_stroke_px
    for cl in layout.clutter:
        if cl.shape == "line":
            _draw_segment(canvas, np.asarray(cl.points_mm[0]) / s, np.asarray(cl.points_mm[1]) / s, thin)
        elif cl.shape == "rect":
            (x0, y0), (x1, y1) = cl.points_mm
            cs = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]) / s
            for k in range(4):
                _draw_segment(canvas, cs[k], cs[(k + 1) % 4], thin)
        else:
            r = cl.radius_mm / s
            fill_annulus(canvas, np.asarray(cl.points_mm[0]) / s, r + thin / 2, r - thin / 2)
    for x, y, r in layout.speckles:
        fill_annulus(canvas, (x, y), r, -1.0)

    img = BinaryImage(canvas)
    side_px = REFERENCE_SIDE_MM / s
    truth = GroundTruth(
        objects=objects,
        labels=labels,
        scale_mm_per_px=s,
        plot_mm_per_px=layout.plot_mm_per_px,
        canvas_px=(W, H),
        reference_vertices_px=[tuple(map(float, v)) for v in tri_px],
        reference_side_px=side_px,
        strokes_px=strokes,
        ink_pixels=int(canvas.sum()),
    )
    return img, truth


# ---------------------------------------------------------------------------
# random layouts

_DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))


class _Tree:
    """Orthogonal duct network grown on lattice nodes."""

    def __init__(self):
        self.adj: dict[tuple[int, int], set[tuple[int, int]]] = {}

    def add_edge(self, a, b):
        d = (b[0] - a[0], b[1] - a[1])
        self.adj.setdefault(a, set()).add(d)
        self.adj.setdefault(b, set()).add((-d[0], -d[1]))

    def degree(self, n):
        return len(self.adj.get(n, ()))

    def is_fitting(self, n):
        dirs = self.adj.get(n, set())
        if len(dirs) >= 3:
            return True
        if len(dirs) == 2:
            a, b = list(dirs)
            return a[0] != -b[0] or a[1] != -b[1]
        return False

    def counts(self):
        tees = sum(1 for n in self.adj if self.degree(n) == 3)
        elbows = sum(1 for n in self.adj if self.degree(n) == 2 and self.is_fitting(n))
        return tees, elbows

    def passthrough(self):
        return [n for n in self.adj if self.degree(n) == 2 and not self.is_fitting(n)]

    def leaves(self):
        return [n for n in self.adj if self.degree(n) == 1]

    def runs(self):
        """Maximal straight runs between stop nodes, as (start node, end node, direction)."""
        stops = [n for n in self.adj if self.degree(n) != 2 or self.is_fitting(n)]
        seen = set()
        out = []
        for s in sorted(stops):
            for d in sorted(self.adj[s]):
                n = s
                while True:
                    n = (n[0] + d[0], n[1] + d[1])
                    if n in stops or n not in self.adj:
                        break
                key = frozenset((s, n))
                if key in seen:
                    continue
                seen.add(key)
                out.append((s, n, d))
        return out


def _free_run(node, d, k, free):
    path = []
    n = node
    for _ in range(k):
        n = (n[0] + d[0], n[1] + d[1])
        if n not in free:
            return None
        path.append(n)
    return path


def _grow_tree(rng, free: set, n_tees: int, n_elbows: int) -> _Tree | None:
    tree = _Tree()
    starts = sorted(free)
    if not starts:
        return None
    for _ in range(30):
        s = starts[rng.integers(len(starts))]
        d = _DIRS[rng.integers(4)]
        path = _free_run(s, d, int(rng.integers(2, 4)), free - {s})
        if path:
            break
    else:
        return None
    prev = s
    for n in path:
        tree.add_edge(prev, n)
        prev = n
    used = {s, *path}

    def extend(node, d, k):
        path = _free_run(node, d, k, free - used)
        if not path:
            return False
        prev = node
        for n in path:
            tree.add_edge(prev, n)
            prev = n
            used.add(n)
        return True

    for _ in range(400):
        tees, elbows = tree.counts()
        if tees >= n_tees and elbows >= n_elbows:
            break
        ops = []
        if tees < n_tees and tree.passthrough():
            ops.append("tee")
        if elbows < n_elbows:
            ops.append("elbow")
        if tees < n_tees and elbows > 0:
            ops.append("tee_from_elbow")
        ops.append("extend")
        op = ops[rng.integers(len(ops))]
        if op == "tee":
            nodes = sorted(tree.passthrough())
            n = nodes[rng.integers(len(nodes))]
            a = next(iter(tree.adj[n]))
            perp = [(-a[1], a[0]), (a[1], -a[0])]
            d = perp[rng.integers(2)]
            extend(n, d, int(rng.integers(1, 3)))
        elif op == "elbow":
            leaves = sorted(tree.leaves())
            n = leaves[rng.integers(len(leaves))]
            a = next(iter(tree.adj[n]))
            perp = [(-a[1], a[0]), (a[1], -a[0])]
            extend(n, perp[rng.integers(2)], int(rng.integers(1, 3)))
        elif op == "tee_from_elbow":
            nodes = sorted(n for n in tree.adj if tree.degree(n) == 2 and tree.is_fitting(n))
            if not nodes:
                continue
            n = nodes[rng.integers(len(nodes))]
            missing = [d for d in _DIRS if d not in tree.adj[n]]
            extend(n, missing[rng.integers(len(missing))], int(rng.integers(1, 3)))
        else:
            leaves = sorted(tree.leaves())
            n = leaves[rng.integers(len(leaves))]
            a = next(iter(tree.adj[n]))
            extend(n, (-a[0], -a[1]), 1)
    tees, elbows = tree.counts()
    if tees != n_tees or elbows != n_elbows or any(tree.degree(n) > 3 for n in tree.adj):
        return None
    free -= used
    # keep other trees off this one's immediate neighbourhood
    return tree


def random_layout(
    rng: np.random.Generator,
    canvas_px: tuple[int, int] = DEFAULT_CANVAS,
    scale_mm_per_px: float = 1.0,
    n_trees: int | None = None,
    max_attempts: int = 200,
) -> Layout:
    """A clean layout of orthogonal duct trees, diffusers and one reference node.

    Tree sizes are drawn so the expected object mix follows SURVEY_COUNTS.
    """
    for _ in range(max_attempts):
        try:
            return _random_layout_once(rng, canvas_px, scale_mm_per_px, n_trees)
        except LayoutError:
            continue
    raise LayoutError("could not place a valid random layout")


def _random_layout_once(rng, canvas_px, scale, n_trees) -> Layout:
    layout = Layout(scale_mm_per_px=scale, canvas_px=tuple(canvas_px))
    W, H = layout.extent_mm
    S = LATTICE_MM
    nx = int((W - 400) // S) + 1
    ny = int((H - 400) // S) + 1
    if nx < 3 or ny < 3:
        raise LayoutError("canvas too small for a duct network")
    ox = (W - (nx - 1) * S) / 2
    oy = (H - (ny - 1) * S) / 2

    def pos(n):
        return np.array([ox + n[0] * S, oy + n[1] * S])

    side = REFERENCE_SIDE_MM
    h = side * math.sqrt(3) / 2
    corner = int(rng.integers(4))
    cx = 60 + side / 2 if corner in (0, 3) else W - 60 - side / 2
    cy = 60 + 2 * h / 3 if corner in (0, 1) else H - 60 - h / 3
    layout.reference_mm = (cx, cy)
    tri = Polygon(layout.reference_vertices_mm())
    free = {(i, j) for i in range(nx) for j in range(ny) if tri.distance(Point(pos((i, j)))) > 260}

    if n_trees is None:
        n_trees = max(1, round(W * H / 2000.0**2))
    trees = []
    for _ in range(n_trees):
        tree = None
        for _ in range(20):
            tees = int(rng.choice([2, 3, 4], p=[0.3, 0.4, 0.3]))
            elbows = int(rng.choice([1, 2, 3], p=[0.3, 0.4, 0.3]))
            trial_free = set(free)
            tree = _grow_tree(rng, trial_free, tees, elbows)
            if tree is not None:
                # buffer ring so that separate trees never share neighbouring nodes
                for n in tree.adj:
                    for d in _DIRS:
                        trial_free.discard((n[0] + d[0], n[1] + d[1]))
                free = trial_free
                break
        if tree is None:
            if not trees:
                raise LayoutError("no room for a duct network")
            break
        trees.append(tree)

    ducts: list[DuctSpec] = []
    fittings: list[FittingSpec] = []
    for tree in trees:
        runs = tree.runs()
        base = len(ducts)
        widths = [int(rng.choice(DUCT_WIDTHS)) for _ in runs]
        heights = [int(rng.choice(DUCT_HEIGHTS)) for _ in runs]
        incident: dict[tuple[int, int], list[int]] = {}
        for k, (a, b, _) in enumerate(runs):
            for n in (a, b):
                if tree.is_fitting(n):
                    incident.setdefault(n, []).append(k)
        radius = {}
        for n, ks in incident.items():
            wmax = max(widths[k] for k in ks)
            # leave a gap of at least three stroke widths between a branch end and the run beside it
            radius[n] = wmax / 2 + max(float(rng.uniform(0.05, 0.15)) * wmax, 3 * layout.hvac_stroke_px * scale)
        for k, (a, b, d) in enumerate(runs):
            pa, pb = pos(a), pos(b)
            u = np.array(d, dtype=float)
            ea = pa + u * radius.get(a, 0.0)
            eb = pb - u * radius.get(b, 0.0)
            c = (ea + eb) / 2
            ducts.append(
                DuctSpec(
                    center_mm=(float(c[0]), float(c[1])),
                    angle_deg=math.degrees(math.atan2(u[1], u[0])) % 180.0,
                    length_mm=float(np.hypot(*(eb - ea))),
                    width_mm=widths[k],
                    height_mm=heights[k],
                    label_side=int(rng.choice([-1, 1])),
                )
            )
        for n, ks in sorted(incident.items()):
            p = pos(n)
            fittings.append(FittingSpec((float(p[0]), float(p[1])), [base + k for k in ks]))
    layout.ducts = ducts
    layout.fittings = fittings

    duct_polys = [Polygon(d.corners(grow=3 * scale)) for d in ducts]
    blocked = [tri] + duct_polys
    label_polys = []
    for i, d in enumerate(ducts):
        placed = None
        for side_ in (d.label_side, -d.label_side):
            d.label_side = side_
            lp = box(*layout.label_box_mm(i))
            own_ok = lp.distance(duct_polys[i]) > 0
            clear = all(lp.distance(p) >= 40.0 for j, p in enumerate(duct_polys) if j != i)
            clear = clear and lp.distance(tri) >= 40.0 and all(lp.distance(q) >= 40.0 for q in label_polys)
            if own_ok and clear and box(0, 0, W, H).contains(lp):
                placed = lp
                break
        if placed is None:
            raise LayoutError(f"no room for the label of duct {i}")
        label_polys.append(placed)
    blocked += label_polys

    n_core = len(ducts) + len(fittings)
    # Other objects make up their surveyed share of all objects
    other_share = SURVEY_COUNTS[OTHER] / sum(SURVEY_COUNTS.values())
    n_other = int(rng.poisson(other_share / (1 - other_share) * n_core))
    spots = [pos((i + 0.5, j + 0.5)) for i in range(nx - 1) for j in range(ny - 1)]
    spots += [pos(n) for n in sorted(free)]
    spots += list(rng.uniform([150, 150], [W - 150, H - 150], size=(4 * len(spots), 2)))
    order = rng.permutation(len(spots))
    others: list[OtherSpec] = []
    for k in order:
        if len(others) >= n_other:
            break
        size = float(rng.choice([120, 140, 160, 180]))
        o = OtherSpec(str(rng.choice(["circle", "octagon"])), tuple(map(float, spots[k])), size)
        poly = o.polygon(grow=3 * scale)
        if not box(0, 0, W, H).contains(poly):
            continue
        if all(poly.distance(p) >= 60.0 for p in blocked):
            others.append(o)
            blocked.append(poly)
    layout.others = others
    validate_layout(layout)
    return layout


def add_noise(layout: Layout, rng: np.random.Generator) -> Layout:
    """Noisy twin of a clean layout: stroke jitter, broken ducts, thin clutter, specks.

    Object geometry and ground truth are unchanged.
    """
    noisy = Layout.from_dict(layout.to_dict())
    base = noisy.hvac_stroke_px
    for d in noisy.ducts:
        d.stroke_px = base + float(rng.integers(-1, 2))
        if d.length_mm >= 3.5 * d.width_mm and rng.random() < 0.3:
            d.breaks = [(float(rng.uniform(-0.1, 0.1)) * d.length_mm, float(rng.uniform(5.0, 15.0)))]
    for o in noisy.others:
        o.stroke_px = base + float(rng.integers(-1, 2))

    W, H = noisy.extent_mm
    tri = Polygon(noisy.reference_vertices_mm()).buffer(30.0)
    keepout = [Polygon(d.corners(grow=30.0)) for d in noisy.ducts]
    keepout += [o.polygon(grow=30.0) for o in noisy.others]
    keepout += [box(*noisy.label_box_mm(i)).buffer(30.0) for i, d in enumerate(noisy.ducts) if d.annotate]
    n_clutter = int(rng.integers(3, 7))
    tries = 0
    while len(noisy.clutter) < n_clutter and tries < 500:
        tries += 1
        kind = str(rng.choice(["line", "rect", "circle"]))
        c = rng.uniform([100, 100], [W - 100, H - 100])
        if kind == "line":
            a = rng.uniform(0, math.pi)
            L = rng.uniform(150, 600)
            u = np.array([math.cos(a), math.sin(a)]) * L / 2
            cl = ClutterSpec("line", [tuple(map(float, c - u)), tuple(map(float, c + u))])
        elif kind == "rect":
            half = rng.uniform(60, 150, size=2)
            cl = ClutterSpec("rect", [tuple(map(float, c - half)), tuple(map(float, c + half))])
        else:
            cl = ClutterSpec("circle", [tuple(map(float, c))], float(rng.uniform(70, 150)))
        g = cl.geometry()
        if not box(0, 0, W, H).contains(g) or g.intersects(tri):
            continue
        # most clutter keeps clear of the HVAC content; the rest lands anywhere
        if rng.random() < 0.85 and any(g.intersects(k) for k in keepout):
            continue
        noisy.clutter.append(cl)
    Wp, Hp = noisy.canvas_px
    tri_px = Polygon(noisy.reference_vertices_mm() / noisy.scale_mm_per_px).buffer(10.0)
    for _ in range(int(rng.integers(10, 41))):
        x, y = rng.uniform(0, Wp), rng.uniform(0, Hp)
        if not tri_px.contains(Point(x, y)):
            noisy.speckles.append((float(x), float(y), float(rng.uniform(0.5, 1.5))))
    return noisy


def random_corpus(
    seed: int,
    n: int,
    profile: str = "clean",
    canvas_px: tuple[int, int] = DEFAULT_CANVAS,
    scale_mm_per_px: float = 1.0,
) -> list[tuple[Layout, BinaryImage, GroundTruth]]:
    """``n`` drawings, reproducible from ``seed``; clean and noisy corpora share layouts."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")
    out = []
    for i in range(n):
        layout = random_layout(np.random.default_rng([seed, i]), canvas_px, scale_mm_per_px)
        if profile == "noisy":
            layout = add_noise(layout, np.random.default_rng([seed, i, 1]))
        img, truth = render(layout)
        out.append((layout, img, truth))
    return out
