"""Typed HVAC object records in drawing-frame millimetres."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

DUCT = "Duct"
ELBOW = "Elbow"
TEE = "Tee"
CROSS = "Cross"
OTHER = "Other"
KINDS = (DUCT, ELBOW, TEE, CROSS, OTHER)
FITTING_ARITY = {ELBOW: 2, TEE: 3, CROSS: 4}


@dataclass(frozen=True)
class Port:
    """Connection face: ``position`` in mm, ``direction`` is the outward unit normal."""

    position: tuple[float, float]
    direction: tuple[float, float]

    def to_dict(self) -> dict:
        return {"position": list(self.position), "direction": list(self.direction)}

    @classmethod
    def from_dict(cls, d: dict) -> "Port":
        return cls(tuple(map(float, d["position"])), tuple(map(float, d["direction"])))


@dataclass(frozen=True)
class HvacObject:
    id: int
    kind: str
    center_mm: tuple[float, float]
    axis: tuple[float, float] | None = None
    length_mm: float | None = None
    width_mm: float | None = None
    height_mm: float | None = None
    connections: tuple[int, ...] = ()
    ports: tuple[Port, ...] = ()
    outline_mm: tuple[tuple[float, float], ...] = ()
    confidence: float = 1.0
    material: str | None = None
    notes: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown object kind {self.kind!r}")
        for name in ("length_mm", "width_mm", "height_mm"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ValueError(f"object {self.id}: {name} must be > 0, got {v}")
        arity = FITTING_ARITY.get(self.kind)
        if arity is not None and len(self.connections) != arity:
            raise ValueError(
                f"object {self.id}: {self.kind} needs {arity} connections, got {len(self.connections)}"
            )

    def dims(self) -> dict[str, float | None]:
        return {"width_mm": self.width_mm, "height_mm": self.height_mm, "length_mm": self.length_mm}

    def duct_ports(self) -> tuple[Port, Port]:
        """The two end faces of a duct, ordered (-axis end, +axis end)."""
        if self.kind != DUCT or self.axis is None or self.length_mm is None:
            raise ValueError(f"object {self.id} is not a fully specified duct")
        cx, cy = self.center_mm
        ux, uy = self.axis
        h = self.length_mm / 2.0
        return (
            Port((cx - h * ux, cy - h * uy), (-ux, -uy)),
            Port((cx + h * ux, cy + h * uy), (ux, uy)),
        )

    def evolve(self, **changes) -> "HvacObject":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "kind": self.kind,
            "center_mm": [float(v) for v in self.center_mm],
            "axis": None if self.axis is None else [float(v) for v in self.axis],
            "length_mm": self.length_mm,
            "width_mm": self.width_mm,
            "height_mm": self.height_mm,
            "connections": list(self.connections),
            "ports": [p.to_dict() for p in self.ports],
            "outline_mm": [list(p) for p in self.outline_mm],
            "confidence": self.confidence,
        }
        if self.material is not None:
            d["material"] = self.material
        if self.notes:
            d["notes"] = list(self.notes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HvacObject":
        return cls(
            id=int(d["id"]),
            kind=d["kind"],
            center_mm=tuple(float(v) for v in d["center_mm"]),
            axis=None if d.get("axis") is None else tuple(float(v) for v in d["axis"]),
            length_mm=d.get("length_mm"),
            width_mm=d.get("width_mm"),
            height_mm=d.get("height_mm"),
            connections=tuple(int(v) for v in d.get("connections", ())),
            ports=tuple(Port.from_dict(p) for p in d.get("ports", ())),
            outline_mm=tuple(tuple(float(v) for v in p) for p in d.get("outline_mm", ())),
            confidence=float(d.get("confidence", 1.0)),
            material=d.get("material"),
            notes=tuple(d.get("notes", ())),
        )
