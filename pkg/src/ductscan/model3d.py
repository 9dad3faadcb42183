"""Parametric triangle meshes for ducts and fittings, and scene assembly.

Every solid is a plan-view polygon extruded over the duct height. The 3D
frame keeps x, flips the drawing's downward y to point up the page, and
puts z vertically; units stay millimetres. A fitting is the union of one
straight leg per port running from the junction point to the port face, with
adjacent legs cut at their bisector (a mitre). ``segments`` > 1 replaces
each outside mitre corner with a polygon tangent to a circle of half the
duct width, which rounds the bend.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import nearest_point_to_lines
from .objects import CROSS, DUCT, ELBOW, OTHER, TEE, HvacObject, Port

log = logging.getLogger(__name__)

DEFAULT_Z_MM = 2800.0
DEFAULT_SNAP_LIMIT_MM = 50.0
DEFAULT_OTHER_HEIGHT_MM = 300.0
PORT_COUNT = {DUCT: 2, ELBOW: 2, TEE: 3, CROSS: 4, OTHER: 0}


class ModelError(ValueError):
    pass


def _plan(p) -> np.ndarray:
    """Drawing-frame (x, y down) to model plan (x, y up)."""
    return np.array([float(p[0]), -float(p[1])])


@dataclass(frozen=True)
class ParamSpec:
    object_id: int
    kind: str
    width_mm: float
    height_mm: float
    length_mm: float | None
    center: tuple[float, float, float]  # model frame
    rotation_deg: float  # about +z, from +x
    ports: tuple[tuple[tuple[float, float, float], tuple[float, float, float]], ...] = ()
    segments: int = 1

    def __post_init__(self):
        for name in ("width_mm", "height_mm"):
            v = getattr(self, name)
            if not (v is not None and math.isfinite(v) and v > 0):
                raise ModelError(f"object {self.object_id}: {name} must be > 0, got {v}")
        if self.length_mm is not None and not (math.isfinite(self.length_mm) and self.length_mm > 0):
            raise ModelError(f"object {self.object_id}: length_mm must be > 0, got {self.length_mm}")
        if self.kind not in PORT_COUNT:
            raise ModelError(f"object {self.object_id}: unknown kind {self.kind!r}")
        if len(self.ports) != PORT_COUNT[self.kind]:
            raise ModelError(
                f"object {self.object_id}: {self.kind} needs {PORT_COUNT[self.kind]} ports, got {len(self.ports)}"
            )
        if self.segments < 1:
            raise ModelError("segments must be >= 1")


@dataclass
class Mesh:
    vertices: np.ndarray  # (N, 3) float mm
    triangles: np.ndarray  # (M, 3) int
    object_id: int = -1

    def volume(self) -> float:
        v = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)

    def translated(self, offset) -> "Mesh":
        return Mesh(self.vertices + np.asarray(offset, dtype=np.float64), self.triangles.copy(), self.object_id)


def mesh_problems(mesh: Mesh, area_eps: float = 1e-9) -> list[str]:
    """Empty when the mesh is closed, consistently wound outward and free of slivers."""
    problems = []
    v, t = mesh.vertices, mesh.triangles
    if len(t) == 0:
        return ["no triangles"]
    if t.min() < 0 or t.max() >= len(v):
        return ["triangle index out of range"]
    area2 = np.linalg.norm(np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]]), axis=1)
    if (area2 <= area_eps).any():
        problems.append(f"{int((area2 <= area_eps).sum())} degenerate triangles")
    directed: dict[tuple[int, int], int] = {}
    for a, b, c in t.tolist():
        for e in ((a, b), (b, c), (c, a)):
            directed[e] = directed.get(e, 0) + 1
    if any(n != 1 for n in directed.values()):
        problems.append("an edge is used twice in the same direction (inconsistent winding)")
    if any((b, a) not in directed for a, b in directed):
        problems.append("open boundary edge (not watertight)")
    if mesh.volume() <= 0:
        problems.append("non-positive signed volume (inward normals)")
    return problems


# ---------------------------------------------------------------------------
# polygon helpers


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _cross(o, a, b) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def _drop_collinear(poly: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    pts = list(poly)
    changed = True
    while changed and len(pts) > 3:
        changed = False
        for i in range(len(pts)):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
            scale = max(np.hypot(*(c - a)), 1.0)
            if abs(_cross(a, b, c)) <= tol * scale * scale or np.hypot(*(b - a)) <= tol * scale:
                del pts[i]
                changed = True
                break
    return np.array(pts)


def ear_clip(poly: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple counter-clockwise polygon."""
    idx = list(range(len(poly)))
    out = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(poly) ** 2:
            raise ModelError("polygon could not be triangulated (self-intersecting?)")
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = poly[i0], poly[i1], poly[i2]
            if _cross(a, b, c) <= 1e-9 * np.hypot(*(b - a)) * np.hypot(*(c - b)):
                continue  # reflex or flat
            blocked = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = poly[j]
                if _cross(a, b, p) >= 0 and _cross(b, c, p) >= 0 and _cross(c, a, p) >= 0:
                    blocked = True
                    break
            if not blocked:
                out.append((i0, i1, i2))
                del idx[k]
                break
        else:
            raise ModelError("no ear found; polygon is not simple")
    out.append(tuple(idx))
    return out


def extrude(poly: np.ndarray, z0: float, z1: float, object_id: int = -1, hub=None) -> Mesh:
    """Closed prism over a simple plan polygon.

    Caps are ear-clipped, or fanned from ``hub`` when the polygon is
    star-shaped about that point (which avoids slivers along long straight
    runs of collinear vertices).
    """
    poly = np.asarray(poly, dtype=np.float64)
    if _signed_area(poly) < 0:
        poly = poly[::-1]
    poly = _drop_collinear(poly)
    n = len(poly)
    verts = [np.column_stack([poly, np.full(n, z0)]), np.column_stack([poly, np.full(n, z1)])]
    tris = []
    if hub is None:
        for a, b, c in ear_clip(poly):
            tris.append((n + a, n + b, n + c))
            tris.append((a, c, b))
    else:
        h0, h1 = 2 * n, 2 * n + 1
        verts.append(np.array([[hub[0], hub[1], z0], [hub[0], hub[1], z1]], dtype=np.float64))
        for i in range(n):
            j = (i + 1) % n
            tris.append((h1, n + i, n + j))
            tris.append((h0, j, i))
    for i in range(n):
        j = (i + 1) % n
        tris.append((i, j, n + j))
        tris.append((i, n + j, n + i))
    return Mesh(np.vstack(verts), np.array(tris, dtype=np.int64), object_id)


# ---------------------------------------------------------------------------
# plan outlines


def _line_meet(p1, d1, p2, d2):
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(den) < 1e-12:
        return None
    r = p2 - p1
    t = (r[0] * d2[1] - r[1] * d2[0]) / den
    return p1 + t * d1


def fitting_outline(junction, legs, width: float, segments: int = 1) -> np.ndarray:
    """Counter-clockwise plan polygon of mitred legs.

    ``legs`` are (unit direction, length) pairs measured from ``junction``.
    """
    J = np.asarray(junction, dtype=np.float64)
    hw = width / 2.0
    order = sorted(legs, key=lambda l: math.atan2(l[0][1], l[0][0]))
    pts = []
    for k, (d, L) in enumerate(order):
        d = np.asarray(d, dtype=np.float64)
        left = np.array([-d[1], d[0]])
        end = J + L * d
        pts.append(end - hw * left)
        pts.append(end + hw * left)
        if len(order) == 1:
            continue
        dn, _ = order[(k + 1) % len(order)]
        dn = np.asarray(dn, dtype=np.float64)
        left_n = np.array([-dn[1], dn[0]])
        turn = math.atan2(d[0] * dn[1] - d[1] * dn[0], d @ dn) % (2 * math.pi)
        if abs(turn - math.pi) < 1e-9:
            continue  # straight through: the edges are collinear
        if turn < math.pi:
            corner = _line_meet(J + hw * left, d, J - hw * left_n, dn)
            if corner is not None:
                if (corner - J) @ d >= L or (corner - J) @ dn >= order[(k + 1) % len(order)][1]:
                    raise ModelError("fitting legs are too short for the angle between them")
                pts.append(corner)
            continue
        # outside corner: tangent polygon around a circle of radius hw
        a0 = math.atan2(left[1], left[0])
        span = turn - math.pi
        r = hw / math.cos(span / (2 * segments))
        for j in range(segments):
            a = a0 + (j + 0.5) * span / segments
            pts.append(J + r * np.array([math.cos(a), math.sin(a)]))
    return np.array(pts)


def _box_outline(center, axis, length, width) -> np.ndarray:
    c = np.asarray(center, dtype=np.float64)
    u = np.asarray(axis, dtype=np.float64)
    v = np.array([-u[1], u[0]])
    a, b = length / 2.0, width / 2.0
    return np.array([c - a * u - b * v, c + a * u - b * v, c + a * u + b * v, c - a * u + b * v])


# ---------------------------------------------------------------------------
# specs and meshes


def _fitting_junction(ports: list[Port]) -> np.ndarray:
    pts = [_plan(p.position) for p in ports]
    dirs = [_plan(p.direction) for p in ports]
    j = nearest_point_to_lines(pts, dirs)
    return np.mean(pts, axis=0) if j is None else j


def to_param_spec(
    obj: HvacObject,
    z_mm: float = DEFAULT_Z_MM,
    segments: int = 1,
    other_height_mm: float = DEFAULT_OTHER_HEIGHT_MM,
) -> ParamSpec:
    """Map a plan-view object to 3D parameters at elevation ``z_mm``."""
    name = f"object {obj.id} ({obj.kind})"
    if obj.kind == OTHER:
        if not obj.outline_mm and obj.width_mm is None:
            raise ModelError(f"{name}: no outline or size")
        if obj.outline_mm:
            o = np.array([_plan(p) for p in obj.outline_mm])
            w, l = np.ptp(o, axis=0)
        else:
            w = l = obj.width_mm
        c = _plan(obj.center_mm)
        return ParamSpec(obj.id, OTHER, float(w), float(other_height_mm), float(l), (c[0], c[1], z_mm), 0.0)

    if obj.width_mm is None or obj.height_mm is None:
        raise ModelError(f"{name}: missing width or height")
    if obj.kind == DUCT:
        if obj.axis is None or obj.length_mm is None:
            raise ModelError(f"{name}: missing axis or length")
        ports = obj.duct_ports()
        c = _plan(obj.center_mm)
        u = _plan(obj.axis)
        rot = math.degrees(math.atan2(u[1], u[0]))
    else:
        ports = obj.ports
        if len(ports) != PORT_COUNT[obj.kind]:
            raise ModelError(f"{name}: needs {PORT_COUNT[obj.kind]} ports, has {len(ports)}")
        c = _fitting_junction(list(ports))
        d0 = _plan(ports[0].direction)
        rot = math.degrees(math.atan2(d0[1], d0[0]))
    ports3 = tuple(
        ((float(p[0]), float(p[1]), float(z_mm)), (float(d[0]), float(d[1]), 0.0))
        for p, d in ((_plan(q.position), _plan(q.direction)) for q in ports)
    )
    return ParamSpec(
        obj.id, obj.kind, float(obj.width_mm), float(obj.height_mm),
        None if obj.kind != DUCT else float(obj.length_mm),
        (float(c[0]), float(c[1]), float(z_mm)), rot, ports3, segments,
    )


def fitting_legs(spec: ParamSpec) -> list[tuple[np.ndarray, float]]:
    J = np.array(spec.center[:2])
    legs = []
    for pos, d in spec.ports:
        u = np.array(d[:2])
        u = u / np.hypot(*u)
        L = float((np.array(pos[:2]) - J) @ u)
        if L <= spec.width_mm / 2:
            raise ModelError(
                f"object {spec.object_id}: port {pos[:2]} lies within half a width of the junction"
            )
        legs.append((u, L))
    return legs


def generate_mesh(spec: ParamSpec) -> Mesh:
    z0 = spec.center[2] - spec.height_mm / 2.0
    z1 = spec.center[2] + spec.height_mm / 2.0
    if spec.kind in (DUCT, OTHER):
        a = math.radians(spec.rotation_deg)
        poly = _box_outline(spec.center[:2], (math.cos(a), math.sin(a)), spec.length_mm, spec.width_mm)
        return extrude(poly, z0, z1, spec.object_id)
    poly = fitting_outline(spec.center[:2], fitting_legs(spec), spec.width_mm, spec.segments)
    # every leg strip contains the junction, so the outline is star-shaped about it
    return extrude(poly, z0, z1, spec.object_id, hub=spec.center[:2])


# ---------------------------------------------------------------------------
# scene


@dataclass
class Scene3D:
    meshes: list[Mesh] = field(default_factory=list)
    metadata: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def group_name(self, k: int) -> str:
        m = self.metadata[k]
        return f"{m['kind'].lower()}_{m['id']}"

    def to_obj(self) -> str:
        lines = ["# units: mm", "# z up; x east; y north"]
        base = 1
        for k, mesh in enumerate(self.meshes):
            lines.append(f"g {self.group_name(k)}")
            lines.extend(f"v {x:.4f} {y:.4f} {z:.4f}" for x, y, z in mesh.vertices)
            lines.extend(f"f {a + base} {b + base} {c + base}" for a, b, c in mesh.triangles)
            base += len(mesh.vertices)
        return "\n".join(lines) + "\n"

    def to_dict(self, obj_file: str | None = None) -> dict:
        return {
            "units": "mm",
            "obj_file": obj_file,
            "objects": [
                {
                    **m,
                    "mesh": {
                        "group": self.group_name(k),
                        "vertex_count": int(len(self.meshes[k].vertices)),
                        "triangle_count": int(len(self.meshes[k].triangles)),
                        "volume_mm3": self.meshes[k].volume(),
                    },
                }
                for k, m in enumerate(self.metadata)
            ],
            "warnings": list(self.warnings),
        }

    def to_json(self, obj_file: str | None = None) -> str:
        return json.dumps(self.to_dict(obj_file), indent=2)


def snap_ducts(objects: list[HvacObject], snap_limit_mm: float = DEFAULT_SNAP_LIMIT_MM) -> tuple[list[HvacObject], list[str]]:
    """Move duct ends onto the ports of the fittings they connect to."""
    warnings = []
    ends: dict[int, list[np.ndarray]] = {}
    for o in objects:
        if o.kind == DUCT and o.axis is not None and o.length_mm is not None:
            ends[o.id] = [np.array(p.position) for p in o.duct_ports()]
    for f in objects:
        if f.kind not in (ELBOW, TEE, CROSS):
            continue
        for duct_id, port in zip(f.connections, f.ports):
            if duct_id not in ends:
                continue
            target = np.array(port.position)
            pair = ends[duct_id]
            k = int(np.argmin([np.hypot(*(e - target)) for e in pair]))
            gap = float(np.hypot(*(pair[k] - target)))
            if gap > snap_limit_mm:
                warnings.append(f"duct {duct_id} is {gap:.1f} mm from port of {f.kind} {f.id}; left unsnapped")
                continue
            pair[k] = target
    out = []
    for o in objects:
        if o.id in ends:
            p0, p1 = ends[o.id]
            d = p1 - p0
            L = float(np.hypot(*d))
            if L > 0:
                c = (p0 + p1) / 2
                u = d / L
                if u[0] < -1e-12 or (abs(u[0]) <= 1e-12 and u[1] < 0):
                    u = -u
                o = o.evolve(center_mm=(float(c[0]), float(c[1])), axis=(float(u[0]), float(u[1])), length_mm=L)
        out.append(o)
    return out, warnings


def assemble_scene(
    objects: list[HvacObject],
    z_mm: float = DEFAULT_Z_MM,
    snap_limit_mm: float = DEFAULT_SNAP_LIMIT_MM,
    segments: int = 1,
    other_height_mm: float = DEFAULT_OTHER_HEIGHT_MM,
) -> Scene3D:
    """One mesh per object, with duct ends snapped to fitting ports."""
    snapped, warnings = snap_ducts(objects, snap_limit_mm)
    scene = Scene3D(warnings=warnings)
    for o in snapped:
        spec = to_param_spec(o, z_mm, segments, other_height_mm)
        scene.meshes.append(generate_mesh(spec))
        scene.metadata.append(
            {
                "id": o.id,
                "kind": o.kind,
                "width_mm": spec.width_mm,
                "height_mm": spec.height_mm,
                "length_mm": spec.length_mm,
                "center_mm": list(spec.center),
                "rotation_deg": spec.rotation_deg,
                "connections": list(o.connections),
                "ports": [{"position": list(p), "direction": list(d)} for p, d in spec.ports],
                "material": o.material,
            }
        )
    for w in warnings:
        log.warning(w)
    return scene
