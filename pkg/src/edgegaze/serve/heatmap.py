"""Gaze heatmaps: grid-binned counts over the screen extent in cm."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    extent_w_cm: float
    extent_h_cm: float

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("grid must have positive dimensions")
        if self.extent_w_cm <= 0 or self.extent_h_cm <= 0:
            raise ValueError("extent must be positive")


@dataclass
class HeatmapGrid:
    spec: GridSpec
    counts: np.ndarray = None
    out_of_extent: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.spec.rows, self.spec.cols), dtype=np.int64)

    def add(self, x_cm: float, y_cm: float) -> bool:
        """Bin one point by floor division; a point exactly on an interior
        cell boundary lands in the higher-index cell. Returns True if the
        point fell inside the extent."""
        if not (np.isfinite(x_cm) and np.isfinite(y_cm)):
            self.out_of_extent += 1
            return False
        col = int(np.floor(x_cm / (self.spec.extent_w_cm / self.spec.cols)))
        row = int(np.floor(y_cm / (self.spec.extent_h_cm / self.spec.rows)))
        if 0 <= row < self.spec.rows and 0 <= col < self.spec.cols:
            self.counts[row, col] += 1
            return True
        self.out_of_extent += 1
        return False

    def total_in_extent(self) -> int:
        return int(self.counts.sum())


def heatmap_accumulate(points, spec: GridSpec) -> HeatmapGrid:
    """Bin an iterable of (x_cm, y_cm) points into a fresh grid."""
    grid = HeatmapGrid(spec)
    for x, y in points:
        grid.add(float(x), float(y))
    return grid


def heatmap_render(grid: HeatmapGrid, cell_px: int = 8) -> np.ndarray:
    """Greyscale image: counts scaled to 0..255 by the max count, one
    cell_px x cell_px block per cell. An empty grid renders all-zero."""
    counts = grid.counts
    peak = counts.max()
    if peak == 0:
        norm = np.zeros_like(counts, dtype=np.uint8)
    else:
        norm = np.floor(counts.astype(np.float64) * 255.0 / peak + 0.5).astype(np.uint8)
    return np.kron(norm, np.ones((cell_px, cell_px), dtype=np.uint8))


def heatmap_csv(grid: HeatmapGrid) -> str:
    lines = [f"# rows={grid.spec.rows} cols={grid.spec.cols} "
             f"extent_w_cm={grid.spec.extent_w_cm!r} extent_h_cm={grid.spec.extent_h_cm!r} "
             f"out_of_extent={grid.out_of_extent}"]
    lines.append("row,col,count")
    for r in range(grid.spec.rows):
        for c in range(grid.spec.cols):
            lines.append(f"{r},{c},{grid.counts[r, c]}")
    return "\n".join(lines) + "\n"
