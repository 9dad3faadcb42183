"""Plane geometry helpers: convex hull, minimum-area rectangle, polyline simplification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, counter-clockwise in a y-up frame, no repeated endpoint."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


@dataclass(frozen=True)
class RotatedRect:
    center: tuple[float, float]
    size: tuple[float, float]  # extent along (edge_dir, its normal)
    edge_dir: tuple[float, float]  # unit vector

    def corners(self) -> np.ndarray:
        cx, cy = self.center
        ux, uy = self.edge_dir
        vx, vy = -uy, ux
        a, b = self.size[0] / 2.0, self.size[1] / 2.0
        return np.array(
            [
                [cx - a * ux - b * vx, cy - a * uy - b * vy],
                [cx + a * ux - b * vx, cy + a * uy - b * vy],
                [cx + a * ux + b * vx, cy + a * uy + b * vy],
                [cx - a * ux + b * vx, cy - a * uy + b * vy],
            ]
        )

    @property
    def area(self) -> float:
        return self.size[0] * self.size[1]


def min_area_rect(points: np.ndarray) -> RotatedRect:
    """Smallest enclosing rectangle; one side is always collinear with a hull edge."""
    hull = convex_hull(points)
    if len(hull) == 1:
        return RotatedRect((float(hull[0, 0]), float(hull[0, 1])), (0.0, 0.0), (1.0, 0.0))
    if len(hull) == 2:
        d = hull[1] - hull[0]
        n = float(np.hypot(*d))
        c = hull.mean(axis=0)
        return RotatedRect((float(c[0]), float(c[1])), (n, 0.0), (float(d[0] / n), float(d[1] / n)))
    edges = np.roll(hull, -1, axis=0) - hull
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    keep = lengths > 0
    dirs = edges[keep] / lengths[keep, None]
    best = None
    for u in dirs:
        v = np.array([-u[1], u[0]])
        pu = hull @ u
        pv = hull @ v
        area = (pu.max() - pu.min()) * (pv.max() - pv.min())
        if best is None or area < best[0] - 1e-9:
            best = (area, u, v, pu, pv)
    _, u, v, pu, pv = best
    mu = (pu.max() + pu.min()) / 2.0
    mv = (pv.max() + pv.min()) / 2.0
    c = mu * u + mv * v
    return RotatedRect(
        (float(c[0]), float(c[1])),
        (float(pu.max() - pu.min()), float(pv.max() - pv.min())),
        (float(u[0]), float(u[1])),
    )


def _dp(points: np.ndarray, eps: float) -> list[int]:
    """Douglas-Peucker on an open polyline; returns kept indices."""
    keep = [0, len(points) - 1]
    stack = [(0, len(points) - 1)]
    while stack:
        a, b = stack.pop()
        if b - a < 2:
            continue
        p, q = points[a], points[b]
        seg = q - p
        n = math.hypot(seg[0], seg[1])
        mid = points[a + 1 : b] - p
        if n == 0:
            dist = np.hypot(mid[:, 0], mid[:, 1])
        else:
            dist = np.abs(mid[:, 0] * seg[1] - mid[:, 1] * seg[0]) / n
        k = int(np.argmax(dist))
        if dist[k] > eps:
            idx = a + 1 + k
            keep.append(idx)
            stack.append((a, idx))
            stack.append((idx, b))
    return sorted(set(keep))


def simplify_closed(points: np.ndarray, eps: float) -> np.ndarray:
    """Douglas-Peucker on a closed curve, anchored at the point farthest from the first."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 4:
        return pts
    far = int(np.argmax(np.hypot(*(pts - pts[0]).T)))
    first = _dp(pts[: far + 1], eps)
    second = _dp(np.vstack([pts[far:], pts[:1]]), eps)
    idx = first + [far + k for k in second[1:-1]]
    out = pts[idx]
    # the anchor itself may be redundant
    changed = True
    while changed and len(out) > 3:
        changed = False
        for i in range(len(out)):
            p, a, b = out[i], out[i - 1], out[(i + 1) % len(out)]
            seg = b - a
            n = math.hypot(seg[0], seg[1])
            d = abs((p[0] - a[0]) * seg[1] - (p[1] - a[1]) * seg[0]) / n if n else 0.0
            if d <= eps:
                out = np.delete(out, i, axis=0)
                changed = True
                break
    return out


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area in the coordinate frame as given."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def fit_line(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Total least squares line: (point on line, unit direction)."""
    c = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - c, full_matrices=False)
    return c, vt[0]


def line_intersection(p1, d1, p2, d2) -> np.ndarray | None:
    m = np.array([[d1[0], -d2[0]], [d1[1], -d2[1]]], dtype=np.float64)
    if abs(np.linalg.det(m)) < 1e-12:
        return None
    t = np.linalg.solve(m, np.asarray(p2, dtype=np.float64) - np.asarray(p1, dtype=np.float64))
    return np.asarray(p1, dtype=np.float64) + t[0] * np.asarray(d1, dtype=np.float64)


def nearest_point_to_lines(points, dirs) -> np.ndarray | None:
    """Least-squares point minimising squared distance to several lines."""
    a = np.zeros((2, 2))
    b = np.zeros(2)
    for p, d in zip(points, dirs):
        d = np.asarray(d, dtype=np.float64)
        m = np.eye(2) - np.outer(d, d)
        a += m
        b += m @ np.asarray(p, dtype=np.float64)
    if abs(np.linalg.det(a)) < 1e-9 * max(1.0, np.trace(a) ** 2):
        return None
    return np.linalg.solve(a, b)


def point_rect_distance(p, rect_corners: np.ndarray) -> float:
    """Distance from a point to a filled convex quadrilateral (0 inside)."""
    return point_polygon_distance(p, rect_corners)


def point_polygon_distance(p, poly: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    poly = np.asarray(poly, dtype=np.float64)
    inside = False
    n = len(poly)
    best = math.inf
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        ab = b - a
        L2 = float(ab @ ab)
        t = 0.0 if L2 == 0 else min(1.0, max(0.0, float((p - a) @ ab) / L2))
        q = a + t * ab
        best = min(best, float(np.hypot(*(p - q))))
        if (a[1] > p[1]) != (b[1] > p[1]):
            xint = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if p[0] < xint:
                inside = not inside
    return 0.0 if inside else best


def segment_distance(a0, a1, b0, b1) -> float:
    """Distance between two closed segments."""
    a0, a1, b0, b1 = (np.asarray(v, dtype=np.float64) for v in (a0, a1, b0, b1))

    def pt_seg(p, s0, s1):
        d = s1 - s0
        L2 = float(d @ d)
        t = 0.0 if L2 == 0 else min(1.0, max(0.0, float((p - s0) @ d) / L2))
        return float(np.hypot(*(p - (s0 + t * d))))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    d1, d2 = cross(b0, b1, a0), cross(b0, b1, a1)
    d3, d4 = cross(a0, a1, b0), cross(a0, a1, b1)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return 0.0
    return min(pt_seg(a0, b0, b1), pt_seg(a1, b0, b1), pt_seg(b0, a0, a1), pt_seg(b1, a0, a1))


def polygon_distance(pa: np.ndarray, pb: np.ndarray) -> float:
    """Distance between two filled simple polygons (0 if they overlap)."""
    if point_polygon_distance(pa[0], pb) == 0.0 or point_polygon_distance(pb[0], pa) == 0.0:
        return 0.0
    best = math.inf
    for i in range(len(pa)):
        for j in range(len(pb)):
            best = min(
                best,
                segment_distance(pa[i], pa[(i + 1) % len(pa)], pb[j], pb[(j + 1) % len(pb)]),
            )
    return best
