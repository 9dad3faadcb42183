"""Figures written next to the JSON/CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluate import METRICS, MatchReport  # noqa: E402
from .objects import CROSS, DUCT, ELBOW, OTHER, TEE, HvacObject  # noqa: E402
from .raster import BinaryImage  # noqa: E402

KIND_COLOURS = {DUCT: "tab:blue", ELBOW: "tab:orange", TEE: "tab:green", CROSS: "tab:red", OTHER: "tab:purple"}


def accuracy_figure(report: MatchReport, path: str | Path, title: str = "Extraction accuracy") -> Path:
    """Grouped bars: one group per class plus the overall row."""
    rows = [(k, acc) for k, acc in sorted(report.per_class.items())]
    rows.append(("overall", report.overall))
    x = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(1.6 * len(rows) + 2, 4))
    width = 0.8 / len(METRICS)
    for m, name in enumerate(METRICS):
        vals = [acc[m] for _, acc in rows]
        bars = ax.bar(x + (m - 1) * width, vals, width, label=name)
        ax.bar_label(bars, labels=[f"{v:.1%}" for v in vals], fontsize=7, rotation=90, padding=2)
    ax.set_xticks(x, [k for k, _ in rows])
    ax.set_ylim(0, 1.15)
    ax.set_ylabel("accuracy")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def overlay_figure(
    img: BinaryImage, objects: list[HvacObject], mm_per_px: float, path: str | Path, max_side_px: int = 2000
) -> Path:
    """Drawing with detected outlines and fitting centres drawn over it."""
    step = max(1, int(np.ceil(max(img.width, img.height) / max_side_px)))
    bits = img.bits[::step, ::step]
    fig, ax = plt.subplots(figsize=(8, 8 * bits.shape[0] / bits.shape[1]))
    extent = (0, img.width * mm_per_px, img.height * mm_per_px, 0)
    ax.imshow(~bits, cmap="gray", extent=extent, interpolation="nearest")
    for o in objects:
        colour = KIND_COLOURS[o.kind]
        if o.outline_mm:
            poly = np.array(o.outline_mm + (o.outline_mm[0],))
            ax.plot(poly[:, 0], poly[:, 1], color=colour, lw=1)
        else:
            ax.plot(*o.center_mm, "o", color=colour, ms=4)
        ax.annotate(str(o.id), o.center_mm, fontsize=6, color=colour, ha="center", va="center")
    handles = [plt.Line2D([], [], color=c, label=k) for k, c in KIND_COLOURS.items()]
    ax.legend(handles=handles, fontsize=7, loc="upper right")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
