"""Grid/world coordinate conventions shared by every module.

Cell (row, col) covers the world rectangle
[col*res, (col+1)*res) x [row*res, (row+1)*res), so x maps to columns and
y maps to rows. Headings are degrees in [0, 360), 0 along +x,
counterclockwise positive.
"""

from __future__ import annotations

from collections import deque

import numpy as np

FREE = 0
OCCUPIED = 1
UNKNOWN = -1

# 8-neighborhood, fixed order for deterministic tie-breaking.
NEIGHBORS_8 = (
    (-1, 0), (1, 0), (0, -1), (0, 1),
    (-1, -1), (-1, 1), (1, -1), (1, 1),
)


def cell_of(x: float, y: float, resolution: float) -> tuple[int, int]:
    """World point (meters) to the (row, col) cell containing it."""
    return int(np.floor(y / resolution)), int(np.floor(x / resolution))


def center_of(row: int, col: int, resolution: float) -> tuple[float, float]:
    """World coordinates of a cell center."""
    return (col + 0.5) * resolution, (row + 0.5) * resolution


def in_bounds(rows: int, cols: int, r: int, c: int) -> bool:
    return 0 <= r < rows and 0 <= c < cols


def normalize_heading(deg: float) -> float:
    h = float(deg) % 360.0
    return h if h >= 0.0 else h + 360.0


def wrap_angle(deg: float) -> float:
    """Wrap to (-180, 180]."""
    a = float(deg) % 360.0
    if a > 180.0:
        a -= 360.0
    return a


def bearing_to(x0: float, y0: float, x1: float, y1: float) -> float:
    """Absolute bearing in degrees from point 0 to point 1, in [0, 360)."""
    return normalize_heading(np.degrees(np.arctan2(y1 - y0, x1 - x0)))


def reachable_mask(occ: np.ndarray, start: tuple[int, int]) -> np.ndarray:
    """Flood fill over free cells; independent reachability oracle.

    Uses the same movement rule as the planner: 8-connected, but diagonal
    moves may not cut corners past an occupied cell."""
    rows, cols = occ.shape
    seen = np.zeros_like(occ, dtype=bool)
    if not in_bounds(rows, cols, *start) or occ[start] != FREE:
        return seen
    queue = deque([start])
    seen[start] = True
    while queue:
        r, c = queue.popleft()
        for dr, dc in NEIGHBORS_8:
            nr, nc = r + dr, c + dc
            if not in_bounds(rows, cols, nr, nc) or seen[nr, nc] \
                    or occ[nr, nc] != FREE:
                continue
            if dr and dc and (occ[r + dr, c] != FREE or occ[r, c + dc] != FREE):
                continue
            seen[nr, nc] = True
            queue.append((nr, nc))
    return seen
