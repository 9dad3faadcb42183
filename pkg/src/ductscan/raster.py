"""Monochrome drawing rasters.

Pixel convention shared by every module: ``x`` is the column (rightward),
``y`` is the row (downward), origin at the top-left pixel. Pixel (x, y)
covers the unit square [x, x+1) x [y, y+1) of the continuous drawing frame,
so its centre sits at (x + PIXEL_CENTRE, y + PIXEL_CENTRE).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

STANDARD_WIDTH = 7680
STANDARD_HEIGHT = 4320
DEFAULT_THRESHOLD = 0.5
PIXEL_CENTRE = 0.5


class DrawingError(Exception):
    """Raised when a drawing file cannot be turned into a BinaryImage."""


@dataclass(frozen=True)
class PixelPoint:
    x: int
    y: int


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """Row-major foreground mask. ``bits[y, x]`` is True where there is ink."""

    bits: np.ndarray
    mm_per_px: float | None = None

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2 or bits.shape[0] < 1 or bits.shape[1] < 1:
            raise ValueError(f"bits must be a non-empty 2-D mask, got shape {bits.shape}")
        if self.mm_per_px is not None:
            if not (math.isfinite(self.mm_per_px) and self.mm_per_px > 0):
                raise ValueError(f"mm_per_px must be finite and > 0, got {self.mm_per_px}")
        bits = bits.copy()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def foreground_count(self) -> int:
        return int(self.bits.sum())

    def with_scale(self, mm_per_px: float) -> "BinaryImage":
        return BinaryImage(self.bits, mm_per_px)

    def contains(self, p: PixelPoint) -> bool:
        return 0 <= p.x < self.width and 0 <= p.y < self.height

    def to_rgba(self) -> np.ndarray:
        """Ink as opaque black on a transparent background."""
        out = np.zeros(self.bits.shape + (4,), dtype=np.uint8)
        out[self.bits, 3] = 255
        return out


def _luminance_alpha(im: Image.Image) -> tuple[np.ndarray, np.ndarray]:
    mode = im.mode
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(im, dtype=np.float64)
        peak = 65535.0 if arr.max(initial=0) > 255 or mode.startswith("I;16") else 255.0
        return arr / peak, np.ones_like(arr, dtype=bool)
    if mode == "1":
        arr = np.asarray(im, dtype=np.float64)
        return arr, np.ones_like(arr, dtype=bool)
    if mode == "L":
        arr = np.asarray(im, dtype=np.float64) / 255.0
        return arr, np.ones_like(arr, dtype=bool)
    if mode == "LA":
        arr = np.asarray(im, dtype=np.float64) / 255.0
        return arr[..., 0], arr[..., 1] > 0
    if mode == "P":
        im = im.convert("RGBA")
        mode = "RGBA"
    if mode == "RGB":
        arr = np.asarray(im, dtype=np.float64) / 255.0
        alpha = np.ones(arr.shape[:2], dtype=bool)
    elif mode == "RGBA":
        arr = np.asarray(im, dtype=np.float64) / 255.0
        alpha = arr[..., 3] > 0
    else:
        raise DrawingError(f"unsupported PNG pixel format {mode!r}")
    lum = 0.2126 * arr[..., 0] + 0.7152 * arr[..., 1] + 0.0722 * arr[..., 2]
    return lum, alpha


def binarize(luminance: np.ndarray, alpha: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    return (np.asarray(alpha) > 0) & (np.asarray(luminance) < threshold)


def load_drawing(path: str | Path, threshold: float = DEFAULT_THRESHOLD) -> BinaryImage:
    """Read a PNG drawing; ink is any non-transparent pixel darker than ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise DrawingError(f"{path}: not a PNG file (format {im.format})")
            im.load()
            lum, alpha = _luminance_alpha(im)
    except (OSError, UnidentifiedImageError, SyntaxError) as exc:
        raise DrawingError(f"{path}: unreadable drawing ({exc})") from exc
    if lum.size == 0:
        raise DrawingError(f"{path}: zero-size image")
    return BinaryImage(binarize(lum, alpha, threshold))


def save_drawing(img: BinaryImage, path: str | Path) -> None:
    Image.fromarray(img.to_rgba(), mode="RGBA").save(path, format="PNG")


def validate_standard(img: BinaryImage) -> list[str]:
    """List departures from the drawing export standard. Never raises."""
    violations = []
    if (img.width, img.height) != (STANDARD_WIDTH, STANDARD_HEIGHT):
        violations.append(
            f"resolution {img.width}x{img.height} differs from {STANDARD_WIDTH}x{STANDARD_HEIGHT}"
        )
    return violations
