"""JSON schemas for every file the CLI reads or writes."""

from __future__ import annotations

import jsonschema

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_OR_NULL = {"type": ["number", "null"], "exclusiveMinimum": 0}
_XY = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_KIND = {"enum": ["Duct", "Elbow", "Tee", "Cross", "Other"]}

PORT = {
    "type": "object",
    "required": ["position", "direction"],
    "properties": {"position": _XY, "direction": _XY},
}

OBJECT = {
    "type": "object",
    "required": ["id", "kind", "center_mm"],
    "properties": {
        "id": {"type": "integer", "minimum": 0},
        "kind": _KIND,
        "center_mm": _XY,
        "axis": {"oneOf": [{"type": "null"}, _XY]},
        "length_mm": _POS_OR_NULL,
        "width_mm": _POS_OR_NULL,
        "height_mm": _POS_OR_NULL,
        "connections": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "ports": {"type": "array", "items": PORT},
        "outline_mm": {"type": "array", "items": _XY},
        "confidence": {"type": "number", "minimum": 0, "maximum": 1},
        "material": {"type": "string"},
        "notes": {"type": "array", "items": {"type": "string"}},
    },
}

OBJECTS = {
    "type": "object",
    "required": ["objects"],
    "properties": {
        "source": {"type": "string"},
        "mm_per_px": _POS,
        "reference": {"type": ["object", "null"]},
        "objects": {"type": "array", "items": OBJECT},
        "labels": {"type": "array"},
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
}

_BOX = {"type": "array", "items": {"type": "integer"}, "minItems": 4, "maxItems": 4}

GROUND_TRUTH = {
    "type": "object",
    "required": ["scale_mm_per_px", "objects"],
    "properties": {
        "scale_mm_per_px": _POS,
        "plot_mm_per_px": _POS,
        "canvas_px": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
        "reference": {
            "type": "object",
            "properties": {"vertices_px": {"type": "array", "items": _XY}, "side_px": _POS},
        },
        "objects": {"type": "array", "items": OBJECT},
        "labels": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["object_id", "text", "bbox_px", "glyph_boxes_px"],
                "properties": {
                    "object_id": {"type": "integer"},
                    "text": {"type": "string"},
                    "bbox_px": _BOX,
                    "glyph_boxes_px": {"type": "array", "items": _BOX},
                },
            },
        },
        "strokes_px": {"type": "object", "additionalProperties": _POS},
        "ink_pixels": {"type": "integer", "minimum": 0},
    },
}

LAYOUT = {
    "type": "object",
    "properties": {
        "ducts": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["center_mm", "angle_deg", "length_mm", "width_mm", "height_mm"],
                "properties": {
                    "center_mm": _XY,
                    "angle_deg": _NUM,
                    "length_mm": _POS,
                    "width_mm": _POS,
                    "height_mm": _POS,
                    "annotate": {"type": "boolean"},
                    "label_side": {"enum": [-1, 1]},
                    "breaks": {"type": "array", "items": _XY},
                    "stroke_px": _POS_OR_NULL,
                },
                "additionalProperties": False,
            },
        },
        "reference_mm": _XY,
        "others": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["shape", "center_mm", "size_mm"],
                "properties": {
                    "shape": {"enum": ["circle", "octagon"]},
                    "center_mm": _XY,
                    "size_mm": _POS,
                    "stroke_px": _POS_OR_NULL,
                },
                "additionalProperties": False,
            },
        },
        "clutter": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["shape", "points_mm"],
                "properties": {
                    "shape": {"enum": ["line", "rect", "circle"]},
                    "points_mm": {"type": "array", "items": _XY, "minItems": 1, "maxItems": 2},
                    "radius_mm": {"type": "number", "minimum": 0},
                },
                "additionalProperties": False,
            },
        },
        "speckles": {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}},
        "fittings": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["node_mm", "ducts"],
                        "properties": {"node_mm": _XY, "ducts": {"type": "array", "items": {"type": "integer"}}},
                    },
                },
            ]
        },
        "scale_mm_per_px": _POS,
        "plot_mm_per_px": _POS,
        "canvas_px": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
        "label_cell_px": _POS,
    },
    "additionalProperties": False,
}

CONFIG = {
    "type": "object",
    "properties": {
        "threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "thick_threshold_mm": _POS,
        "proximity_factor": _POS,
        "collinear_deg": _POS,
        "loc_tol_mm": {"type": "number", "minimum": 0},
        "dim_tol_rel": {"type": "number", "minimum": 0},
        "z_mm": _POS,
        "snap_limit_mm": _POS,
        "seed": {"type": "integer", "minimum": 0},
        "plot_mm_per_px": _POS,
        "mm_per_px": _POS_OR_NULL,
        "proximity_mm": _POS_OR_NULL,
        "segments": {"type": "integer", "minimum": 1},
        "other_height_mm": _POS,
        "material": {"type": ["string", "null"]},
        "remove_thin": {"type": "boolean"},
    },
    "additionalProperties": False,
}

_ACC = {
    "type": "object",
    "required": ["type", "location", "dimensions", "n"],
    "properties": {
        "type": {"type": "number", "minimum": 0, "maximum": 1},
        "location": {"type": "number", "minimum": 0, "maximum": 1},
        "dimensions": {"type": "number", "minimum": 0, "maximum": 1},
        "n": {"type": "integer", "minimum": 0},
    },
}

METRICS = {
    "type": "object",
    "required": ["per_class", "overall"],
    "properties": {
        "per_class": {"type": "object", "additionalProperties": _ACC},
        "overall": _ACC,
        "unmatched_truth": {"type": "integer", "minimum": 0},
        "unmatched_pred": {"type": "integer", "minimum": 0},
        "loc_tol_mm": {"type": "number"},
        "dim_tol_rel": {"type": "number"},
        "drawings": {"type": "integer"},
    },
}

SCENE = {
    "type": "object",
    "required": ["units", "objects"],
    "properties": {
        "units": {"const": "mm"},
        "obj_file": {"type": ["string", "null"]},
        "objects": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "kind", "width_mm", "height_mm", "center_mm", "mesh"],
                "properties": {
                    "id": {"type": "integer"},
                    "kind": _KIND,
                    "width_mm": _POS,
                    "height_mm": _POS,
                    "length_mm": _POS_OR_NULL,
                    "center_mm": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
                    "rotation_deg": _NUM,
                    "connections": {"type": "array", "items": {"type": "integer"}},
                    "material": {"type": ["string", "null"]},
                    "mesh": {
                        "type": "object",
                        "required": ["group", "vertex_count", "triangle_count"],
                        "properties": {
                            "group": {"type": "string"},
                            "vertex_count": {"type": "integer"},
                            "triangle_count": {"type": "integer"},
                            "volume_mm3": _NUM,
                        },
                    },
                },
            },
        },
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
}

SCHEMAS = {
    "objects": OBJECTS,
    "ground_truth": GROUND_TRUTH,
    "layout": LAYOUT,
    "config": CONFIG,
    "metrics": METRICS,
    "scene": SCENE,
}


class SchemaError(ValueError):
    """A document does not match its schema; ``path`` locates the offending field."""

    def __init__(self, name: str, path: str, message: str):
        super().__init__(f"{name}: {path}: {message}")
        self.path = path


def _format_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def validate(doc, name: str) -> None:
    """Raise SchemaError for the first violation, deepest path first."""
    validator = jsonschema.Draft202012Validator(SCHEMAS[name])
    errors = sorted(validator.iter_errors(doc), key=lambda e: (-len(e.absolute_path), str(e.absolute_path)))
    if errors:
        e = errors[0]
        raise SchemaError(name, _format_path(e.absolute_path), e.message)
