"""Dimension labels: textbox detection, glyph matching, parsing and attachment.

Text size and stroke weight are plotted quantities, so ``find_textboxes``
measures them at the plot scale, while attachment distances are model
millimetres.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image

from .contour import ContourSet, contour_area, perimeter
from .font import CELL_COLS, CELL_ROWS, GLYPHS
from .geometry import polygon_distance
from .objects import DUCT, OTHER, HvacObject
from .raster import BinaryImage

log = logging.getLogger(__name__)

GLYPH_MIN_MM = 1.0
LINE_MIN_MM = 2.0
LINE_MAX_MM = 10.0
MATCH_THRESHOLD = 0.7
ATTACH_RANGE = 3.0  # in text heights

_DIMENSION_RE = re.compile(r"^(\d+)[xX*](\d+)$")
_TEMPLATES = {ch: bm.astype(bool) for ch, bm in GLYPHS.items()}


class DimensionParseError(ValueError):
    pass


@dataclass(frozen=True)
class TextBox:
    bbox: tuple[int, int, int, int]  # inclusive pixel bounds x0, y0, x1, y1
    glyph_boxes: tuple[tuple[int, int, int, int], ...]
    text: str = ""
    confidence: float = 0.0
    contour_ids: tuple[int, ...] = ()

    @property
    def height_px(self) -> int:
        return self.bbox[3] - self.bbox[1] + 1

    @property
    def center(self) -> tuple[float, float]:
        return (self.bbox[0] + self.bbox[2]) / 2.0, (self.bbox[1] + self.bbox[3]) / 2.0


@dataclass
class DimensionAnnotation:
    width_mm: float
    height_mm: float
    anchor: tuple[float, float]  # textbox centre, pixels
    bbox: tuple[int, int, int, int] | None = None
    text_height_px: float = 0.0
    attached_to: int | None = None

    def __post_init__(self):
        if not (self.width_mm > 0 and self.height_mm > 0):
            raise ValueError("annotation dimensions must be positive")


def _glyph_stroke_px(cs: ContourSet, i: int) -> float:
    c = cs[i]
    holes = cs.holes_of(i)
    ink = abs(contour_area(c)) - sum(abs(contour_area(h)) for h in holes)
    boundary = perimeter(c.points) + sum(perimeter(h.points) for h in holes)
    if boundary <= 0:
        return 1.0
    return 2.0 * ink / boundary + 1.0


def find_textboxes(
    cs: ContourSet, mm_per_px: float, thin_threshold_mm: float | None = None
) -> list[TextBox]:
    """Cluster glyph-sized contours into horizontal text lines.

    A contour is glyph-sized when both bounding-box sides are at most
    LINE_MAX_MM and its height is at least GLYPH_MIN_MM, all at ``mm_per_px``.
    Neighbouring glyphs join a line when their horizontal gap is below one
    glyph width and they overlap vertically. Lines shorter than LINE_MIN_MM
    are discarded.
    """
    cands = []
    for i in cs.outer_ids():
        x0, y0, x1, y1 = cs[i].bbox()
        w_mm = (x1 - x0 + 1) * mm_per_px
        h_mm = (y1 - y0 + 1) * mm_per_px
        if h_mm < GLYPH_MIN_MM or h_mm > LINE_MAX_MM or w_mm > LINE_MAX_MM:
            continue
        if thin_threshold_mm is not None and _glyph_stroke_px(cs, i) * mm_per_px >= thin_threshold_mm:
            continue
        cands.append((x0, y0, x1, y1, i))
    cands.sort()

    parent = list(range(len(cands)))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for a in range(len(cands)):
        ax0, ay0, ax1, ay1, _ = cands[a]
        for b in range(a + 1, len(cands)):
            bx0, by0, bx1, by1, _ = cands[b]
            gw = max(ax1 - ax0 + 1, bx1 - bx0 + 1)
            if bx0 - ax1 - 1 >= gw:
                break
            overlap = min(ay1, by1) - max(ay0, by0) + 1
            if overlap >= 0.5 * min(ay1 - ay0 + 1, by1 - by0 + 1):
                parent[find(a)] = find(b)

    lines: dict[int, list] = {}
    for k in range(len(cands)):
        lines.setdefault(find(k), []).append(cands[k])
    boxes = []
    for members in lines.values():
        members.sort()
        ly0 = min(m[1] for m in members)
        ly1 = max(m[3] for m in members)
        if (ly1 - ly0 + 1) * mm_per_px < LINE_MIN_MM:
            continue
        bbox = (members[0][0], ly0, max(m[2] for m in members), ly1)
        glyph_boxes = tuple((m[0], ly0, m[2], ly1) for m in members)
        boxes.append(TextBox(bbox, glyph_boxes, contour_ids=tuple(m[4] for m in members)))
    boxes.sort(key=lambda tb: (tb.bbox[1], tb.bbox[0]))
    return boxes


def _to_grid(crop: np.ndarray) -> np.ndarray:
    im = Image.fromarray((crop * 255).astype(np.uint8), mode="L")
    small = np.asarray(im.resize((CELL_COLS, CELL_ROWS), Image.BILINEAR), dtype=np.float64) / 255.0
    return small >= 0.5


def match_glyph(crop: np.ndarray) -> tuple[str, float]:
    """Best template for one glyph crop, as (character, similarity)."""
    if crop.size == 0 or not crop.any():
        return "?", 0.0
    grid = _to_grid(crop)
    best_ch, best = "?", -1.0
    for ch, tmpl in _TEMPLATES.items():
        sim = 1.0 - np.count_nonzero(grid != tmpl) / grid.size
        if sim > best:
            best_ch, best = ch, sim
    if best < MATCH_THRESHOLD:
        return "?", best
    return best_ch, best


def recognize_text(img: BinaryImage, tb: TextBox) -> TextBox:
    chars, sims = [], []
    for x0, y0, x1, y1 in tb.glyph_boxes:
        x0c, y0c = max(x0, 0), max(y0, 0)
        x1c, y1c = min(x1, img.width - 1), min(y1, img.height - 1)
        crop = img.bits[y0c : y1c + 1, x0c : x1c + 1] if x1c >= x0c and y1c >= y0c else np.zeros((0, 0), bool)
        ch, sim = match_glyph(crop)
        chars.append(ch)
        sims.append(max(sim, 0.0))
    conf = float(np.mean(sims)) if sims else 0.0
    return replace(tb, text="".join(chars), confidence=conf)


def parse_dimension(text: str) -> tuple[int, int]:
    """``"400x250"`` -> (400, 250); separators x, X or *."""
    m = _DIMENSION_RE.match(text.strip())
    if not m:
        raise DimensionParseError(f"not a dimension label: {text!r}")
    w, h = int(m.group(1)), int(m.group(2))
    if w <= 0 or h <= 0:
        raise DimensionParseError(f"non-positive dimension in {text!r}")
    return w, h


def format_dimension(width_mm: int, height_mm: int) -> str:
    return f"{int(width_mm)}x{int(height_mm)}"


def annotations_from_textboxes(boxes: list[TextBox]) -> list[DimensionAnnotation]:
    annos = []
    for tb in boxes:
        try:
            w, h = parse_dimension(tb.text)
        except DimensionParseError as exc:
            log.info("dropping label at %s: %s", tb.bbox, exc)
            continue
        annos.append(
            DimensionAnnotation(float(w), float(h), tb.center, bbox=tb.bbox, text_height_px=float(tb.height_px))
        )
    return annos


def _box_polygon_mm(anno: DimensionAnnotation, mm_per_px: float) -> np.ndarray:
    if anno.bbox is None:
        x, y = anno.anchor
        return np.array([[x + 0.5, y + 0.5]] * 3) * mm_per_px
    x0, y0, x1, y1 = anno.bbox
    # inclusive pixel bounds to the continuous frame
    return np.array([[x0, y0], [x1 + 1, y0], [x1 + 1, y1 + 1], [x0, y1 + 1]], dtype=np.float64) * mm_per_px


def attach_dimensions(
    annos: list[DimensionAnnotation], objects: list[HvacObject], mm_per_px: float
) -> list[HvacObject]:
    """Give each label's W x H to the object whose outline is nearest.

    Sets ``attached_to`` on every annotation it places. An object claimed by
    several labels keeps the nearest; the others stay unattached.
    """
    targets = [o for o in objects if o.kind in (DUCT, OTHER) and len(o.outline_mm) >= 3]
    claims: dict[int, tuple[float, int]] = {}
    for ai, anno in enumerate(annos):
        anno.attached_to = None
        box = _box_polygon_mm(anno, mm_per_px)
        limit = ATTACH_RANGE * anno.text_height_px * mm_per_px
        best = None
        for o in targets:
            d = polygon_distance(box, np.asarray(o.outline_mm))
            if best is None or d < best[0] or (d == best[0] and o.id < best[1]):
                best = (d, o.id)
        if best is None or best[0] > limit:
            log.info("label %.0fx%.0f at %s has no object within %.0f mm", anno.width_mm, anno.height_mm, anno.anchor, limit)
            continue
        prev = claims.get(best[1])
        if prev is None or best[0] < prev[0]:
            claims[best[1]] = (best[0], ai)
    by_id = {o.id: o for o in objects}
    for oid, (_, ai) in claims.items():
        anno = annos[ai]
        anno.attached_to = oid
        by_id[oid] = by_id[oid].evolve(width_mm=anno.width_mm, height_mm=anno.height_mm)
    return [by_id[o.id] for o in objects]

