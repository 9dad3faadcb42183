"""End-to-end extraction: drawing in, typed and dimensioned HVAC objects out."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import ndimage

from .calibrate import ReferenceNode, compute_scale, find_reference
from .contour import ContourSet, trace_contours
from .detect import (
    DEFAULT_COLLINEAR_DEG,
    DEFAULT_PROXIMITY_FACTOR,
    DEFAULT_THICK_THRESHOLD_MM,
    RECTANGULARITY,
    DegenerateContour,
    DuctShape,
    Junction,
    classify_fitting,
    duct_object,
    filter_hvac,
    fit_duct,
    link_ducts,
    merge_continuous,
    other_object,
    rectangularity,
)
from .dimtext import (
    DimensionAnnotation,
    TextBox,
    annotations_from_textboxes,
    attach_dimensions,
    find_textboxes,
    recognize_text,
)
from .objects import CROSS, DUCT, ELBOW, OTHER, TEE, HvacObject
from .raster import DEFAULT_THRESHOLD, BinaryImage

log = logging.getLogger(__name__)

DEFAULT_PLOT_MM_PER_PX = 0.1


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    threshold: float = DEFAULT_THRESHOLD
    thick_threshold_mm: float = DEFAULT_THICK_THRESHOLD_MM
    proximity_factor: float = DEFAULT_PROXIMITY_FACTOR
    collinear_deg: float = DEFAULT_COLLINEAR_DEG
    loc_tol_mm: float = 10.0
    dim_tol_rel: float = 0.02
    z_mm: float = 2800.0
    snap_limit_mm: float = 50.0
    seed: int = 0
    plot_mm_per_px: float = DEFAULT_PLOT_MM_PER_PX
    mm_per_px: float | None = None  # skip calibration when set
    proximity_mm: float | None = None  # absolute override of proximity_factor
    segments: int = 1
    other_height_mm: float = 300.0
    material: str | None = None
    remove_thin: bool = True

    def __post_init__(self):
        positive = (
            "thick_threshold_mm", "proximity_factor", "collinear_deg", "z_mm", "snap_limit_mm",
            "plot_mm_per_px", "other_height_mm", "segments",
        )
        for name in positive:
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive number, got {v!r}")
        for name in ("loc_tol_mm", "dim_tol_rel"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be >= 0, got {v!r}")
        if not 0 < self.threshold <= 1:
            raise ValueError(f"threshold must lie in (0, 1], got {self.threshold!r}")
        for name in ("mm_per_px", "proximity_mm"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive number, got {v!r}")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Extraction:
    objects: list[HvacObject]
    mm_per_px: float
    reference: ReferenceNode | None
    textboxes: list[TextBox] = field(default_factory=list)
    annotations: list[DimensionAnnotation] = field(default_factory=list)
    duct_shapes: list[DuctShape] = field(default_factory=list)
    junctions: list[Junction] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for o in self.objects:
            out[o.kind] = out.get(o.kind, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {
            "mm_per_px": self.mm_per_px,
            "reference": None
            if self.reference is None
            else {"centroid_mm": [c * self.mm_per_px for c in self.reference.centroid], "side_px": self.reference.side_px},
            "objects": [o.to_dict() for o in self.objects],
            "labels": [
                {
                    "width_mm": a.width_mm,
                    "height_mm": a.height_mm,
                    "anchor_mm": [(a.anchor[0] + 0.5) * self.mm_per_px, (a.anchor[1] + 0.5) * self.mm_per_px],
                    "attached_to": a.attached_to,
                }
                for a in self.annotations
            ],
            "warnings": list(self.warnings),
        }


def remove_thin_strokes(bits: np.ndarray, width_px: float) -> np.ndarray:
    """Morphological opening that erases strokes narrower than ``width_px``."""
    k = int(math.floor(width_px))
    if k < 2:
        return bits
    return ndimage.binary_opening(bits, structure=np.ones((k, k), dtype=bool))


def _link_and_merge(ducts, mm_per_px, config):
    for _ in range(len(ducts) + 1):
        junctions, continuations = link_ducts(
            ducts, mm_per_px, config.proximity_mm, config.proximity_factor, config.collinear_deg
        )
        if not continuations:
            return ducts, junctions
        ducts, _ = merge_continuous(ducts, continuations)
    return ducts, junctions


def _inherit_fitting_dims(objects: list[HvacObject]) -> list[HvacObject]:
    by_id = {o.id: o for o in objects}
    out = []
    for o in objects:
        if o.kind in (ELBOW, TEE, CROSS) and o.connections:
            incident = [by_id[i] for i in o.connections if i in by_id]
            best = min(incident, key=lambda d: (-(d.width_mm or 0), -(d.height_mm or 0), d.id))
            o = o.evolve(width_mm=best.width_mm, height_mm=best.height_mm)
        out.append(o)
    return out


def extract(img: BinaryImage, config: PipelineConfig | None = None) -> Extraction:
    """Calibrate, read labels, find ducts and fittings, and attach dimensions."""
    config = config or PipelineConfig()
    timings: dict[str, float] = {}
    warnings: list[str] = []

    def stage(name, fn, *args):
        t0 = time.perf_counter()
        try:
            return fn(*args)
        except Exception as exc:
            raise StageError(name, exc) from exc
        finally:
            timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0

    cs: ContourSet = stage("trace", trace_contours, img)

    reference = None
    if config.mm_per_px is not None:
        scale = config.mm_per_px
    elif img.mm_per_px is not None:
        scale = img.mm_per_px
    else:
        reference = stage("calibrate", find_reference, cs)
        scale = compute_scale(reference)
    plot = config.plot_mm_per_px

    def read_labels():
        boxes = find_textboxes(cs, plot, thin_threshold_mm=config.thick_threshold_mm)
        boxes = [recognize_text(img, tb) for tb in boxes]
        return boxes, annotations_from_textboxes(boxes)

    textboxes, annos = stage("dimtext", read_labels)
    for tb in textboxes:
        if "?" in tb.text or tb.text and len(tb.text) < 3:
            warnings.append(f"unreadable label {tb.text!r} at px {tb.bbox}")

    def find_objects():
        text_ids = {i for tb in textboxes for i in tb.contour_ids}
        if config.remove_thin:
            # erase the lettering and the reference node component by component,
            # so nothing that merely shares their bounding boxes is lost
            drop = set(text_ids)
            if reference is not None:
                drop.add(reference.contour_id)
            labels, _ = ndimage.label(img.bits, structure=np.ones((3, 3), dtype=bool))
            seeds = {int(labels[y, x]) for x, y in (cs[i].points[0] for i in drop)}
            bits = img.bits & ~np.isin(labels, sorted(seeds))
            hcs = trace_contours(remove_thin_strokes(bits, config.thick_threshold_mm / plot))
            hcs = filter_hvac(hcs, plot, config.thick_threshold_mm)
        else:
            drop = set(text_ids)
            if reference is not None:
                drop.add(reference.contour_id)
            keep = []
            for i in cs.outer_ids():
                if i in drop:
                    continue
                keep.append(i)
                keep.extend(k for k in cs[i].children if cs[k].is_hole)
            hcs = filter_hvac(cs.subset(keep), plot, config.thick_threshold_mm)

        ducts: list[DuctShape] = []
        others = []
        for i in hcs.outer_ids():
            c = hcs[i]
            holes = hcs.holes_of(i)
            try:
                rect_ok = rectangularity(c) >= RECTANGULARITY
                if rect_ok:
                    ducts.append(fit_duct(c, holes or None, filled=not holes))
                    continue
            except DegenerateContour:
                pass
            others.append((c, holes))
        return ducts, others

    ducts, others = stage("detect", find_objects)
    ducts, junctions = stage("connect", _link_and_merge, ducts, scale, config)

    objects: list[HvacObject] = [duct_object(d, scale, i) for i, d in enumerate(ducts)]
    conns: dict[int, list[int]] = {i: [] for i in range(len(ducts))}
    fid = len(ducts)
    for j in junctions:
        f = classify_fitting(j, scale, fid)
        if f.kind == OTHER:
            warnings.extend(f.notes)
        else:
            for d in f.connections:
                conns[d].append(fid)
        objects.append(f)
        fid += 1
    objects = [o.evolve(connections=tuple(conns[o.id])) if o.kind == DUCT else o for o in objects]
    for c, holes in others:
        objects.append(other_object(c, holes, scale, len(objects)))

    objects = stage("attach", attach_dimensions, annos, objects, scale)
    for a in annos:
        if a.attached_to is None:
            warnings.append(f"label {a.width_mm:.0f}x{a.height_mm:.0f} not attached to any object")
    objects = _inherit_fitting_dims(objects)
    if config.material is not None:
        objects = [o.evolve(material=config.material) for o in objects]
    for w in warnings:
        log.warning(w)
    return Extraction(objects, scale, reference, textboxes, annos, ducts, junctions, warnings, timings)
