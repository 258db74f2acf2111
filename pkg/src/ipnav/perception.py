"""Simulated open-vocabulary detection over the ego-view ray fan.

Detection scores are the cosine between the query embedding and the
object's visual-attribute embedding plus seeded Gaussian noise, so the
failure modes of a real detector (lookalike confusion, low-score misses)
survive without any vision model. Detected cells register session object
ids; overlapping regions reuse ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import control, grid
from .embedding import cosine
from .scene import Scene, mass_center_cell, object_mass_center

DET_THRESHOLD = 0.5
DET_SIGMA = 0.05
IOU_REUSE = 0.5


class PerceptionError(ValueError):
    pass


@dataclass
class DetectionResult:
    obj_id: str
    distance: float
    angle: float
    score: float


@dataclass
class RegistryEntry:
    region: set = field(default_factory=set)
    source: str = "detection"
    gid_hint: str | None = None
    last_query: str | None = None


class ObjectRegistry:
    """Session object ids for one scene run.

    A new region reuses an existing id when it overlaps an entry with
    IoU > 0.5, or when both carry the same ground-truth hint (the simulated
    detector segments whole objects, so the hint is available); regions
    grow by union over repeated observations. Hints never leak to policies.
    """

    def __init__(self):
        self._entries: dict[str, RegistryEntry] = {}
        self._next = 1

    def __contains__(self, obj_id: str) -> bool:
        return obj_id in self._entries

    def ids(self) -> list[str]:
        return list(self._entries)

    def get(self, obj_id: str) -> RegistryEntry:
        if obj_id not in self._entries:
            raise PerceptionError(f"unknown object id: {obj_id}")
        return self._entries[obj_id]

    def register(self, region, source: str, gid_hint: str | None = None,
                 query: str | None = None) -> str:
        region = set(region)
        if not region:
            raise PerceptionError("cannot register an empty region")
        match = None
        if gid_hint is not None:
            for oid, e in self._entries.items():
                if e.gid_hint == gid_hint:
                    match = oid
                    break
        if match is None:
            for oid, e in self._entries.items():
                inter = len(region & e.region)
                union = len(region | e.region)
                if union and inter / union > IOU_REUSE:
                    match = oid
                    break
        if match is None:
            match = f"obj_{self._next}"
            self._next += 1
            self._entries[match] = RegistryEntry(region=set(), source=source,
                                                 gid_hint=gid_hint)
        entry = self._entries[match]
        entry.region |= region
        if gid_hint is not None and entry.gid_hint is None:
            entry.gid_hint = gid_hint
        if query is not None:
            entry.last_query = query
        return match

    def region_centroid(self, obj_id: str, resolution: float) -> tuple[float, float]:
        entry = self.get(obj_id)
        pts = np.array([grid.center_of(r, c, resolution) for r, c in sorted(entry.region)])
        x, y = pts.mean(axis=0)
        return float(x), float(y)


def visible_objects(scene: Scene, agent) -> list[tuple[str, float, float]]:
    """Objects whose mass-center cell a fan ray reaches first, as
    (gid, distance, relative angle) in gid order."""
    fan = agent.fan()
    cam = agent.camera
    pose = agent.pose
    half_fov = cam.fov_deg / 2.0
    out = []
    for obj in scene.objects:
        cx, cy = object_mass_center(scene, obj.gid)
        d = math.hypot(cx - pose.x, cy - pose.y)
        if d > cam.depth_max + scene.resolution:
            continue
        rel = grid.wrap_angle(grid.bearing_to(pose.x, pose.y, cx, cy)
                              - pose.heading)
        if abs(rel) > half_fov + 1.5:  # ray quantization slack
            continue
        hit = fan.reach(mass_center_cell(scene, obj.gid), cam,
                        transparent=obj.footprint)
        if hit is not None:
            out.append((obj.gid, hit[0], hit[1]))
    return out


def _visible_footprint_cells(fan, obj) -> set:
    return set(obj.footprint) & fan.hit_cells()


@dataclass
class DetectorConfig:
    threshold: float = DET_THRESHOLD
    sigma: float = DET_SIGMA

    def degraded(self) -> "DetectorConfig":
        # stand-in for swapping the detector for a cruder patch matcher
        return DetectorConfig(threshold=self.threshold - 0.1, sigma=self.sigma * 4.0)


def detect_object(query: str, agent, registry: ObjectRegistry, provider,
                  rng: np.random.Generator,
                  cfg: DetectorConfig = DetectorConfig()) -> list[DetectionResult]:
    """Score every visible object against the query; register those at or
    above threshold. Noise draws come from the episode stream in gid order."""
    if not query:
        raise PerceptionError("empty query")
    q = provider.embed(query)
    fan = agent.fan()
    results = []
    for gid, dist, angle in visible_objects(agent.scene, agent):
        obj = agent.scene.object_by_gid(gid)
        score = cosine(q, provider.embed(obj.visual_phrase()))
        if cfg.sigma > 0:
            score += cfg.sigma * float(rng.standard_normal())
        score = min(1.0, max(0.0, score))
        if score < cfg.threshold:
            continue
        region = _visible_footprint_cells(fan, obj)
        if not region:
            region = {mass_center_cell(agent.scene, gid)} & set(obj.footprint) or \
                {min(obj.footprint)}
        oid = registry.register(region, "detection", gid_hint=gid, query=query)
        results.append(DetectionResult(oid, dist, angle, score))
    results.sort(key=lambda d: -d.score)
    return results


def double_check(obj_id: str, agent, registry: ObjectRegistry, provider,
                 rng: np.random.Generator,
                 cfg: DetectorConfig = DetectorConfig()) -> DetectionResult | None:
    """Reposition to a closer viewpoint and re-detect the stored query with
    halved noise. None when the refreshed score falls below threshold."""
    entry = registry.get(obj_id)
    query = entry.last_query
    if not query:
        raise PerceptionError(f"no stored query for {obj_id}")
    res = agent.resolution
    cx, cy = registry.region_centroid(obj_id, res)
    cur = math.hypot(cx - agent.pose.x, cy - agent.pose.y)
    want = min(1.0, cur)

    target_cell = grid.cell_of(cx, cy, res)
    occ = agent.scene.occ
    rows, cols = occ.shape
    r_cells = int(np.ceil((want + res) / res)) + 1
    tr, tc = target_cell
    best, best_err = None, None
    for r in range(max(0, tr - r_cells), min(rows, tr + r_cells + 1)):
        for c in range(max(0, tc - r_cells), min(cols, tc + r_cells + 1)):
            if occ[r, c] == grid.OCCUPIED:
                continue
            x, y = grid.center_of(r, c, res)
            d = math.hypot(x - cx, y - cy)
            err = abs(d - want)
            if err > res:
                continue
            if not control._los_to_region(occ, res, x, y, target_cell, entry.region):
                continue
            if best_err is None or (err, (r, c)) < (best_err, best):
                best, best_err = (r, c), err
    if best is None:
        raise PerceptionError(f"no reachable viewpoint for {obj_id}")

    nav = control.goto_point(agent, grid.center_of(*best, res))
    if nav.blocked:
        raise PerceptionError(f"no reachable viewpoint for {obj_id}")
    control._face(agent, grid.bearing_to(agent.pose.x, agent.pose.y, cx, cy))

    refined = DetectorConfig(threshold=cfg.threshold, sigma=cfg.sigma * 0.5)
    for det in detect_object(query, agent, registry, provider, rng, refined):
        if det.obj_id == obj_id:
            return det
    return None
