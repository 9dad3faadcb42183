"""Embedded 5x7 bitmap font shared by the label renderer and the glyph matcher.

Every glyph is one 8-connected component and spans all five columns, so a
glyph's ink bounds coincide with its cell box horizontally. Vertical position
is carried by the text line, which lets 'x' and 'X' differ by height alone.
The same table is reproduced in docs/font.md.
"""

from __future__ import annotations

import numpy as np

CELL_COLS = 5
CELL_ROWS = 7
ADVANCE = 6  # cells from one glyph origin to the next
CANONICAL_CELL_PX = 3.0

_ROWS = {
    "0": [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    "1": ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", "#####"],
    "2": [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
    "3": ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."],
    "4": ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
    "5": ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
    "6": ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."],
    "7": ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
    "8": [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
    "9": [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."],
    "x": [".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"],
    "X": ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"],
    "*": [".....", "..#..", "#.#.#", ".###.", "#.#.#", "..#..", "....."],
    "Ø": [".####", "#..##", "#.#.#", "#.#.#", "#.#.#", "##..#", "####."],
}

GLYPHS: dict[str, np.ndarray] = {
    ch: np.array([[c == "#" for c in row] for row in rows], dtype=bool) for ch, rows in _ROWS.items()
}
ALPHABET = "".join(GLYPHS)


def glyph(ch: str) -> np.ndarray:
    try:
        return GLYPHS[ch]
    except KeyError:
        raise ValueError(f"character {ch!r} is not in the embedded font") from None


def text_extent(text: str, cell_px: float = CANONICAL_CELL_PX) -> tuple[float, float]:
    """Width and height in pixels of ``text`` set in the font."""
    if not text:
        return 0.0, 0.0
    return ((len(text) - 1) * ADVANCE + CELL_COLS) * cell_px, CELL_ROWS * cell_px


def render_text(
    canvas: np.ndarray, text: str, x0: float, y0: float, cell_px: float = CANONICAL_CELL_PX
) -> list[tuple[int, int, int, int]]:
    """Ink ``text`` with its top-left corner at (x0, y0); return per-glyph boxes.

    Pixel ``i`` covers [i, i+1); it is inked when its centre falls in an
    "on" cell. Boxes are inclusive (x0, y0, x1, y1) pixel bounds of each
    glyph's full cell block.
    """
    h, w = canvas.shape
    boxes = []
    for k, ch in enumerate(text):
        bm = glyph(ch)
        gx = x0 + k * ADVANCE * cell_px
        px0 = int(np.ceil(gx - 0.5))
        px1 = int(np.ceil(gx + CELL_COLS * cell_px - 0.5)) - 1
        py0 = int(np.ceil(y0 - 0.5))
        py1 = int(np.ceil(y0 + CELL_ROWS * cell_px - 0.5)) - 1
        xs = np.arange(max(px0, 0), min(px1, w - 1) + 1)
        ys = np.arange(max(py0, 0), min(py1, h - 1) + 1)
        if len(xs) and len(ys):
            cx = np.clip(((xs + 0.5 - gx) // cell_px).astype(int), 0, CELL_COLS - 1)
            cy = np.clip(((ys + 0.5 - y0) // cell_px).astype(int), 0, CELL_ROWS - 1)
            canvas[np.ix_(ys, xs)] |= bm[np.ix_(cy, cx)]
        boxes.append((px0, py0, px1, py1))
    return boxes
