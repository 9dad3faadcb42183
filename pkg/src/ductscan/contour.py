"""Topological border following (Suzuki & Abe, 1985).

Foreground is 8-connected, background 4-connected. The image is surrounded
by an implicit one-pixel background frame, so components touching the edge
still get an outer border.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .raster import BinaryImage

# Neighbour directions, counter-clockwise as seen on screen (row axis points down).
#                 E   NE   N  NW   W  SW   S  SE
_DROW = np.array([0, -1, -1, -1, 0, 1, 1, 1], dtype=np.int64)
_DCOL = np.array([1, 1, 0, -1, -1, -1, 0, 1], dtype=np.int64)


@dataclass
class Contour:
    """Border pixels in tracing order; ``points[:, 0]`` is x, ``points[:, 1]`` is y."""

    points: np.ndarray
    is_hole: bool
    parent: int | None = None
    children: list[int] = field(default_factory=list)

    @property
    def polarity(self) -> str:
        return "hole" if self.is_hole else "outer"

    def __len__(self) -> int:
        return len(self.points)

    def bbox(self) -> tuple[int, int, int, int]:
        """Inclusive pixel bounds (x0, y0, x1, y1)."""
        x0, y0 = self.points.min(axis=0)
        x1, y1 = self.points.max(axis=0)
        return int(x0), int(y0), int(x1), int(y1)


@dataclass
class ContourSet:
    contours: list[Contour]
    image_shape: tuple[int, int]  # (height, width)

    def __len__(self) -> int:
        return len(self.contours)

    def __iter__(self):
        return iter(self.contours)

    def __getitem__(self, i: int) -> Contour:
        return self.contours[i]

    def outer_ids(self) -> list[int]:
        return [i for i, c in enumerate(self.contours) if not c.is_hole]

    def holes_of(self, i: int) -> list[Contour]:
        return [self.contours[k] for k in self.contours[i].children if self.contours[k].is_hole]

    def subset(self, ids) -> "ContourSet":
        """Re-indexed copy keeping ``ids``; links to dropped contours are cut."""
        ids = sorted(set(ids))
        remap = {old: new for new, old in enumerate(ids)}
        out = []
        for old in ids:
            c = self.contours[old]
            out.append(
                Contour(
                    points=c.points,
                    is_hole=c.is_hole,
                    parent=remap.get(c.parent) if c.parent is not None else None,
                    children=[remap[k] for k in c.children if k in remap],
                )
            )
        return ContourSet(out, self.image_shape)


@numba.njit(cache=True)
def _grow(arr, need):
    if need <= arr.shape[0]:
        return arr
    cap = arr.shape[0] * 2
    while cap < need:
        cap *= 2
    out = np.empty(cap, dtype=arr.dtype)
    out[: arr.shape[0]] = arr
    return out


@numba.njit(cache=True)
def _trace_all(bits):
    h, w = bits.shape
    f = np.zeros((h + 2, w + 2), dtype=np.int32)
    for r in range(h):
        for c in range(w):
            if bits[r, c]:
                f[r + 1, c + 1] = 1

    xs = np.empty(1024, dtype=np.int32)
    ys = np.empty(1024, dtype=np.int32)
    npts = 0
    # indexed by border number; number 1 is the frame, treated as a hole border
    b_hole = np.zeros(64, dtype=np.uint8)
    b_parent = np.zeros(64, dtype=np.int32)
    b_start = np.zeros(64, dtype=np.int64)
    b_len = np.zeros(64, dtype=np.int64)
    b_hole[1] = 1
    nbd = 1

    for i in range(1, h + 1):
        lnbd = 1
        for j in range(1, w + 1):
            fij = f[i, j]
            if fij == 0:
                continue
            hole = False
            if fij == 1 and f[i, j - 1] == 0:
                i2 = i
                j2 = j - 1
            elif fij >= 1 and f[i, j + 1] == 0:
                hole = True
                i2 = i
                j2 = j + 1
                if fij > 1:
                    lnbd = fij
            else:
                if fij != 1:
                    lnbd = abs(fij)
                continue

            nbd += 1
            if nbd >= b_hole.shape[0]:
                b_hole = _grow(b_hole, nbd + 1)
                b_parent = _grow(b_parent, nbd + 1)
                b_start = _grow(b_start, nbd + 1)
                b_len = _grow(b_len, nbd + 1)
            b_hole[nbd] = 1 if hole else 0
            if (b_hole[lnbd] == 1) != hole:
                b_parent[nbd] = lnbd
            else:
                b_parent[nbd] = b_parent[lnbd]
            b_start[nbd] = npts

            # 3.1: clockwise search around (i, j) starting at (i2, j2)
            d0 = 0
            for d in range(8):
                if _DROW[d] == i2 - i and _DCOL[d] == j2 - j:
                    d0 = d
            found = -1
            for k in range(8):
                d = (d0 - k) % 8
                if f[i + _DROW[d], j + _DCOL[d]] != 0:
                    found = d
                    break
            if found < 0:
                f[i, j] = -nbd
                xs = _grow(xs, npts + 1)
                ys = _grow(ys, npts + 1)
                xs[npts] = j - 1
                ys[npts] = i - 1
                npts += 1
                b_len[nbd] = 1
                if f[i, j] != 1:
                    lnbd = abs(f[i, j])
                continue

            i1 = i + _DROW[found]
            j1 = j + _DCOL[found]
            i2 = i1
            j2 = j1
            i3 = i
            j3 = j
            while True:
                xs = _grow(xs, npts + 1)
                ys = _grow(ys, npts + 1)
                xs[npts] = j3 - 1
                ys[npts] = i3 - 1
                npts += 1
                # 3.3: counter-clockwise search around (i3, j3) after (i2, j2)
                dprev = 0
                for d in range(8):
                    if _DROW[d] == i2 - i3 and _DCOL[d] == j2 - j3:
                        dprev = d
                east_zero = False
                i4 = i3
                j4 = j3
                for k in range(1, 9):
                    d = (dprev + k) % 8
                    ni = i3 + _DROW[d]
                    nj = j3 + _DCOL[d]
                    if f[ni, nj] != 0:
                        i4 = ni
                        j4 = nj
                        break
                    if d == 0:
                        east_zero = True
                # 3.4
                if east_zero:
                    f[i3, j3] = -nbd
                elif f[i3, j3] == 1:
                    f[i3, j3] = nbd
                # 3.5
                if i4 == i and j4 == j and i3 == i1 and j3 == j1:
                    break
                i2 = i3
                j2 = j3
                i3 = i4
                j3 = j4
            b_len[nbd] = npts - b_start[nbd]
            if f[i, j] != 1:
                lnbd = abs(f[i, j])

    n = nbd - 1
    return (
        xs[:npts].copy(),
        ys[:npts].copy(),
        b_hole[2 : nbd + 1].copy(),
        b_parent[2 : nbd + 1].copy(),
        b_start[2 : nbd + 1].copy(),
        b_len[2 : nbd + 1].copy(),
        n,
    )


def trace_contours(img: BinaryImage | np.ndarray) -> ContourSet:
    """Extract every outer and hole border with its nesting hierarchy."""
    bits = img.bits if isinstance(img, BinaryImage) else np.asarray(img, dtype=bool)
    bits = np.ascontiguousarray(bits, dtype=np.bool_)
    xs, ys, holes, parents, starts, lens, n = _trace_all(bits)
    contours = []
    for k in range(n):
        s, ln = starts[k], lens[k]
        pts = np.stack([xs[s : s + ln], ys[s : s + ln]], axis=1).astype(np.int64)
        parent = int(parents[k]) - 2
        contours.append(Contour(pts, bool(holes[k]), parent if parent >= 0 else None))
    for k, c in enumerate(contours):
        if c.parent is not None:
            contours[c.parent].children.append(k)
    return ContourSet(contours, bits.shape)


def shoelace(points: np.ndarray) -> float:
    """Signed polygon area with y pointing up (counter-clockwise positive)."""
    if len(points) < 3:
        return 0.0
    x = points[:, 0].astype(np.float64)
    y = -points[:, 1].astype(np.float64)
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def contour_area(c: Contour) -> float:
    """Enclosed area of the pixel-centre polygon; outer borders trace positive, holes negative."""
    return shoelace(c.points)


def perimeter(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    d = np.diff(np.vstack([points, points[:1]]), axis=0).astype(np.float64)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())
