"""Top-down feature map and natural-language retrieval.

Each object footprint cell holds the embedding of the object's visible
attributes only; personalized tokens are never written, so the map can
answer "computer" but is structurally blind to "alice's computer". That
blindness is the crux the memory module exists to fix.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import grid
from .perception import ObjectRegistry
from .scene import Scene

MAP_THRESHOLD = 0.55
MIN_CONTOUR_AREA = 2
MAX_CANDIDATES = 10


class SemanticMapError(ValueError):
    pass


@dataclass
class MapCandidate:
    obj_id: str
    distance: float
    angle: float
    area: int


@dataclass
class SemanticMap:
    grid: np.ndarray  # (rows, cols, dim) float32, unit vectors or zero
    resolution: float
    built_from: str


def build_semantic_map(scene: Scene, provider) -> SemanticMap:
    dim = provider.dimension
    fmap = np.zeros((scene.rows, scene.cols, dim), dtype=np.float32)
    for obj in scene.objects:
        vec = provider.embed(obj.visual_phrase()).astype(np.float32)
        for r, c in obj.footprint:
            fmap[r, c] = vec
    return SemanticMap(grid=fmap, resolution=scene.resolution, built_from=scene.id)


def similarity_field(fgrid: np.ndarray, query_vec: np.ndarray) -> np.ndarray:
    """Per-cell cosine against a unit query; zero cells stay at 0."""
    return fgrid.astype(np.float64) @ query_vec


def connected_components(mask: np.ndarray, min_area: int) -> list[list[tuple[int, int]]]:
    """4-connected components of a boolean mask, smallest cell first within
    each component, components ordered by their smallest cell."""
    rows, cols = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for r in range(rows):
        for c in range(cols):
            if not mask[r, c] or seen[r, c]:
                continue
            comp = []
            queue = deque([(r, c)])
            seen[r, c] = True
            while queue:
                cr, cc = queue.popleft()
                comp.append((cr, cc))
                for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    nr, nc = cr + dr, cc + dc
                    if 0 <= nr < rows and 0 <= nc < cols and mask[nr, nc] \
                            and not seen[nr, nc]:
                        seen[nr, nc] = True
                        queue.append((nr, nc))
            if len(comp) >= min_area:
                comps.append(sorted(comp))
    return comps


def contours_to_candidates(comps, pose, resolution: float, registry: ObjectRegistry,
                           source: str, query: str,
                           gid_of_cell=None) -> list[MapCandidate]:
    """Register contour regions and convert to (obj_id, distance, angle)
    relative to the pose, nearest first."""
    cands = []
    for comp in comps:
        pts = np.array([grid.center_of(r, c, resolution) for r, c in comp])
        cx, cy = map(float, pts.mean(axis=0))
        gid_hint = None
        if gid_of_cell is not None:
            hints = {gid_of_cell(rc) for rc in comp}
            hints.discard(None)
            if len(hints) == 1:
                gid_hint = hints.pop()
        oid = registry.register(set(comp), source, gid_hint=gid_hint, query=query)
        dist = float(np.hypot(cx - pose.x, cy - pose.y))
        angle = grid.wrap_angle(grid.bearing_to(pose.x, pose.y, cx, cy) - pose.heading)
        cands.append(MapCandidate(oid, dist, angle, len(comp)))
    cands.sort(key=lambda m: (m.distance, m.obj_id))
    return cands


def retrieve_map(query: str, pose, smap: SemanticMap, registry: ObjectRegistry,
                 provider, scene: Scene | None = None,
                 threshold: float = MAP_THRESHOLD,
                 min_area: int = MIN_CONTOUR_AREA,
                 k_max: int = MAX_CANDIDATES) -> list[MapCandidate]:
    """Similarity-match the query over the map and extract contours."""
    q = provider.embed(query)
    sims = similarity_field(smap.grid, q)
    comps = connected_components(sims >= threshold, min_area)
    gid_of = None
    if scene is not None:
        cell_to_gid = {rc: ob.gid for ob in scene.objects for rc in ob.footprint}
        gid_of = cell_to_gid.get
    cands = contours_to_candidates(comps, pose, smap.resolution, registry,
                                   "map", query, gid_of)
    return cands[:k_max]


def save_map_snapshot(smap: SemanticMap, layer: str | None = None) -> dict:
    rows, cols, dim = smap.grid.shape
    nz = np.argwhere(np.any(smap.grid != 0, axis=-1))
    doc = {
        "resolution": smap.resolution,
        "dim": int(dim),
        "cells": [{"r": int(r), "c": int(c),
                   "v": [float(v) for v in smap.grid[r, c]]} for r, c in nz],
    }
    if layer is not None:
        doc["layer"] = layer
    doc["rows"], doc["cols"] = int(rows), int(cols)
    return doc


def load_map_snapshot(doc: dict, expect_shape: tuple[int, int, int]) -> np.ndarray:
    rows, cols, dim = expect_shape
    if (doc["rows"], doc["cols"], doc["dim"]) != (rows, cols, dim):
        raise SemanticMapError(
            f"snapshot dims {(doc['rows'], doc['cols'], doc['dim'])} "
            f"do not match configured {(rows, cols, dim)}")
    out = np.zeros(expect_shape, dtype=np.float32)
    for cell in doc["cells"]:
        out[cell["r"], cell["c"]] = np.array(cell["v"], dtype=np.float32)
    return out


def dump_snapshot(doc: dict) -> str:
    return json.dumps(doc)
