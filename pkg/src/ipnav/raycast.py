"""Simulated depth sensing: a fan of rays marched through the occupancy grid.

One fan per pose serves three consumers: online occupancy updates
(traversed cells are free, first hit is occupied), visibility tests
(does a ray reach a target cell before any other occupied cell), and
detection geometry (distance and relative angle of the reaching ray).

Hot path: a fan is cast after nearly every primitive action, so the
marcher works on precomputed per-angle offset tables and avoids
allocating more than it must.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid


@dataclass(frozen=True)
class CameraModel:
    fov_deg: float = 90.0
    depth_min: float = 0.1
    depth_max: float = 10.0
    angle_step_deg: float = 1.0
    march_step: float = 0.05

    def __post_init__(self):
        if not self.depth_min < self.depth_max:
            raise ValueError("depth_min must be < depth_max")


class FanView:
    """Result of casting one fan from a pose over a given occupancy grid.

    blocked_idx[r] is the sample index at which ray r ends (first occupied
    cell, or first out-of-bounds sample); samples before it traversed free
    cells. rows/cols arrays are clipped in-bounds; positions at or past the
    block point must be gated by blocked_idx before use.
    """

    def __init__(self, pose_xy, heading, resolution, rel_angles, rows_idx,
                 cols_idx, ts, blocked_idx, hit_occupied, occupied_mask,
                 oob_mask):
        self.pose_xy = pose_xy
        self.heading = heading
        self.resolution = resolution
        self.rel_angles = rel_angles      # (R,) int degrees, relative
        self.rows_idx = rows_idx          # (R, S) int
        self.cols_idx = cols_idx          # (R, S) int
        self.ts = ts                      # (S,) march distances, meters
        self.blocked_idx = blocked_idx    # (R,)
        self.hit_occupied = hit_occupied  # (R,) bool
        self._occupied = occupied_mask    # (R, S) bool
        self._oob = oob_mask              # (R, S) bool
        self._sample_idx = np.arange(rows_idx.shape[1])

    def write_occupancy(self, online: np.ndarray):
        """Mark traversed cells free and hit cells occupied (monotone)."""
        valid = self._sample_idx[None, :] < self.blocked_idx[:, None]
        online[self.rows_idx[valid], self.cols_idx[valid]] = grid.FREE
        hit_rays = np.flatnonzero(self.hit_occupied)
        if hit_rays.size:
            bi = self.blocked_idx[hit_rays]
            online[self.rows_idx[hit_rays, bi],
                   self.cols_idx[hit_rays, bi]] = grid.OCCUPIED

    def hit_cells(self) -> set:
        """Occupied cells struck by the fan."""
        hit_rays = np.flatnonzero(self.hit_occupied)
        if hit_rays.size == 0:
            return set()
        bi = self.blocked_idx[hit_rays]
        return set(zip(self.rows_idx[hit_rays, bi].tolist(),
                       self.cols_idx[hit_rays, bi].tolist()))

    def known_free_cells(self) -> set:
        valid = self._sample_idx[None, :] < self.blocked_idx[:, None]
        return set(zip(self.rows_idx[valid].tolist(),
                       self.cols_idx[valid].tolist()))

    def reach(self, target: tuple[int, int], camera: CameraModel,
              transparent: frozenset = frozenset()):
        """First arrival at `target` within the depth window.

        Returns (distance_m, rel_angle_deg) for the ray closest to the true
        bearing that reaches the target cell before any other occupied
        cell, or None. `transparent` cells (an object's own footprint when
        testing its visibility) do not block the ray; the target cell
        itself may be occupied.
        """
        tr, tc = target
        eq = (self.rows_idx == tr) & (self.cols_idx == tc)
        if transparent:
            occ = self._occupied.copy()
            for (r, c) in transparent:
                if (r, c) != target:
                    occ &= ~((self.rows_idx == r) & (self.cols_idx == c))
            blocking = occ | self._oob
            any_block = blocking.any(axis=1)
            blocked_idx = np.where(any_block, np.argmax(blocking, axis=1),
                                   blocking.shape[1])
        else:
            blocked_idx = self.blocked_idx
        eq &= self._sample_idx[None, :] <= blocked_idx[:, None]
        rays = np.flatnonzero(eq.any(axis=1))
        if rays.size == 0:
            return None
        first = np.argmax(eq[rays], axis=1)
        arrival = self.ts[first]
        window = (arrival >= camera.depth_min) & (arrival <= camera.depth_max)
        rays, arrival = rays[window], arrival[window]
        if rays.size == 0:
            return None
        x, y = self.pose_xy
        tx, ty = grid.center_of(tr, tc, self.resolution)
        true_rel = grid.wrap_angle(grid.bearing_to(x, y, tx, ty) - self.heading)
        pick = int(np.argmin(np.abs(self.rel_angles[rays] - true_rel)))
        return float(arrival[pick]), float(self.rel_angles[rays[pick]])


class RayCaster:
    """Precomputes march offsets for all 360 integer ray angles."""

    def __init__(self, camera: CameraModel = CameraModel()):
        self.camera = camera
        n = int(round(camera.depth_max / camera.march_step))
        self._ts = camera.march_step * np.arange(1, n + 1)
        ang = np.radians(np.arange(360))
        self._xo = np.outer(np.cos(ang), self._ts)  # (360, S) meters
        self._yo = np.outer(np.sin(ang), self._ts)
        half = int(camera.fov_deg / 2)
        self._rel = np.arange(-half, half + 1, int(camera.angle_step_deg))
        self._scaled: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def _tables(self, resolution: float):
        tab = self._scaled.get(resolution)
        if tab is None:
            tab = (self._xo / resolution, self._yo / resolution)
            self._scaled[resolution] = tab
        return tab

    def cast(self, occ: np.ndarray, resolution: float, x: float, y: float,
             heading: float) -> FanView:
        xo, yo = self._tables(resolution)
        h0 = int(round(heading)) % 360
        angles = (h0 + self._rel) % 360
        cs = np.floor(x / resolution + xo[angles]).astype(np.intp)
        rs = np.floor(y / resolution + yo[angles]).astype(np.intp)
        rows, cols = occ.shape
        oob = (rs < 0) | (rs >= rows) | (cs < 0) | (cs >= cols)
        np.clip(rs, 0, rows - 1, out=rs)
        np.clip(cs, 0, cols - 1, out=cs)
        occupied = (occ[rs, cs] == grid.OCCUPIED) & ~oob
        blocking = occupied | oob
        any_block = blocking.any(axis=1)
        blocked_idx = np.where(any_block, np.argmax(blocking, axis=1),
                               blocking.shape[1])
        hit = np.zeros(len(angles), dtype=bool)
        which = np.flatnonzero(any_block)
        hit[which] = occupied[which, blocked_idx[which]]
        return FanView((x, y), heading, resolution, self._rel, rs, cs,
                       self._ts, blocked_idx, hit, occupied, oob)


_DEFAULT_CASTER: dict[CameraModel, RayCaster] = {}


def default_caster(camera: CameraModel = CameraModel()) -> RayCaster:
    caster = _DEFAULT_CASTER.get(camera)
    if caster is None:
        caster = RayCaster(camera)
        _DEFAULT_CASTER[camera] = caster
    return caster


def cell_visible_from(occ: np.ndarray, resolution: float, x: float, y: float,
                      heading: float, target: tuple[int, int],
                      camera: CameraModel = CameraModel()):
    """Convenience wrapper: cast a fan and test reach of one cell."""
    fan = default_caster(camera).cast(occ, resolution, x, y, heading)
    return fan.reach(target, camera)
