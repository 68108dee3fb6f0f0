"""Location-scan machinery: TAL grids, per-location ASR, and heatmaps.

A TAL (trigger activation location) grid enumerates every top-left position
where the full trigger rectangle fits, stepping by a fixed stride. Scanning
a detector over the grid and averaging the per-location ASR yields a single
radiating-effect score; the grid itself serializes as a CSV (source of
truth) plus a grayscale PNG rendering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .asr import DEFAULT_ASR_TAU, asr
from .errors import ValidationError
from .imaging import save_image
from .records import Dataset, Prediction, Tal


def tal_grid(
    height: int,
    width: int,
    trigger: tuple[int, int],
    stride: int,
    origin: Optional[Tal] = None,
    region: Optional[tuple[int, int, int, int]] = None,
) -> list[Tal]:
    """Row-major (x, y) positions where the trigger fits inside the region.

    ``region`` is an (x, y, w, h) sub-rectangle, default the whole image;
    ``origin`` defaults to the region's top-left corner.
    """
    s_x, s_y = trigger
    if stride <= 0:
        raise ValidationError(f"stride {stride} must be > 0")
    if s_x <= 0 or s_y <= 0:
        raise ValidationError(f"trigger size {trigger} must be positive")
    rx, ry, rw, rh = region if region is not None else (0, 0, width, height)
    if s_x > rw or s_y > rh:
        raise ValidationError(
            f"trigger {s_x}x{s_y} larger than scan region {rw}x{rh}"
        )
    ox, oy = origin if origin is not None else (rx, ry)
    positions: list[Tal] = []
    y = oy
    while y + s_y <= ry + rh:
        x = ox
        while x + s_x <= rx + rw:
            positions.append((x, y))
            x += stride
        y += stride
    if not positions:
        raise ValidationError("scan origin leaves no valid trigger position")
    return positions


@dataclass
class TreGrid:
    """Per-TAL ASR values on a regular grid plus their arithmetic mean."""

    xs: tuple[int, ...]          # grid columns, ascending
    ys: tuple[int, ...]          # grid rows, ascending
    values: np.ndarray           # shape (len(ys), len(xs)), ASR in [0, 100]
    stride: int
    origin: Tal
    trigger: tuple[int, int]
    tre: float

    @classmethod
    def from_asr(
        cls,
        asr_by_tal: dict[Tal, float],
        stride: int,
        origin: Tal,
        trigger: tuple[int, int],
    ) -> "TreGrid":
        xs = tuple(sorted({x for x, _ in asr_by_tal}))
        ys = tuple(sorted({y for _, y in asr_by_tal}))
        values = np.full((len(ys), len(xs)), np.nan)
        for (x, y), v in asr_by_tal.items():
            values[ys.index(y), xs.index(x)] = v
        if np.isnan(values).any():
            missing = [
                (xs[j], ys[i])
                for i in range(len(ys))
                for j in range(len(xs))
                if math.isnan(values[i, j])
            ]
            raise ValidationError(f"scan positions do not form a full grid; missing {missing}")
        tre = math.fsum(asr_by_tal.values()) / len(asr_by_tal)
        return cls(
            xs=xs, ys=ys, values=values, stride=stride, origin=origin,
            trigger=trigger, tre=tre,
        )


def tre_scan(
    runs: dict[Tal, dict[str, list[Prediction]]],
    dataset: Dataset,
    goal: str,
    tau: float = DEFAULT_ASR_TAU,
    target_label: Optional[int] = None,
    grid: Optional[Sequence[Tal]] = None,
    stride: Optional[int] = None,
    trigger: tuple[int, int] = (0, 0),
) -> TreGrid:
    """Per-TAL ASR over a complete scan, averaged into a single score.

    ``grid`` (when given) is the expected set of positions; any gap raises
    with the missing positions listed.
    """
    if not runs:
        raise ValidationError("no scan runs supplied")
    if grid is not None:
        missing = [tal for tal in grid if tal not in runs]
        if missing:
            raise ValidationError(
                f"scan incomplete: {len(missing)} missing position(s): {missing[:20]}"
            )
        runs = {tal: runs[tal] for tal in grid}
    asr_by_tal = {
        tal: asr(goal, preds, dataset, tau, target_label) for tal, preds in runs.items()
    }
    xs = sorted({x for x, _ in asr_by_tal})
    ys = sorted({y for _, y in asr_by_tal})
    inferred_stride = stride if stride is not None else (
        xs[1] - xs[0] if len(xs) > 1 else (ys[1] - ys[0] if len(ys) > 1 else 1)
    )
    return TreGrid.from_asr(
        asr_by_tal, stride=inferred_stride, origin=(xs[0], ys[0]), trigger=trigger
    )


def render_heatmap(grid: TreGrid, out_base: str | Path, cell: int = 16) -> tuple[Path, Path]:
    """Write ``<out_base>.csv`` (row-major values; source of truth) and a
    grayscale ``<out_base>.png`` upscaled by ``cell`` pixels per position."""
    out_base = Path(out_base)
    csv_path = out_base.with_suffix(".csv")
    png_path = out_base.with_suffix(".png")
    lines = [",".join(repr(float(v)) for v in row) for row in grid.values]
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    shade = grid.values / 100.0
    big = np.repeat(np.repeat(shade, cell, axis=0), cell, axis=1)
    save_image(big[:, :, None], png_path)
    return csv_path, png_path


def load_heatmap_csv(path: str | Path) -> np.ndarray:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append([float(x) for x in line.split(",")])
    return np.asarray(rows, dtype=np.float64)
