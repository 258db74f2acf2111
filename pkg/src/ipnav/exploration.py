"""Frontier-based exploration over the online occupancy grid.

A frontier is a known-free cell 8-adjacent to unknown space. The search
loop repeatedly drives to the nearest frontier cluster, spins a full
360 degrees sensing and detecting at each 15-degree step, and returns as
soon as any detection lands. Knowledge is monotone: cells only ever move
from unknown to free/occupied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import control, grid
from .perception import DetectorConfig, ObjectRegistry, detect_object

SPIN_STEPS = 24  # 360 / 15
MIN_CLUSTER = 2

EXHAUSTED = "exhausted"
BUDGET = "budget"


@dataclass
class FrontierCluster:
    cells: list[tuple[int, int]]
    centroid: tuple[int, int]
    size: int
    geodesic: float


def frontier_mask(online: np.ndarray) -> np.ndarray:
    rows, cols = online.shape
    free = online == grid.FREE
    unknown = online == grid.UNKNOWN
    near_unknown = np.zeros_like(free)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            shifted = np.zeros_like(unknown)
            rs = slice(max(0, dr), rows + min(0, dr))
            rd = slice(max(0, -dr), rows + min(0, -dr))
            cs = slice(max(0, dc), cols + min(0, dc))
            cd = slice(max(0, -dc), cols + min(0, -dc))
            shifted[rd, cd] = unknown[rs, cs]
            near_unknown |= shifted
    return free & near_unknown


def find_frontiers(online: np.ndarray, agent_cell: tuple[int, int],
                   resolution: float) -> list[FrontierCluster]:
    """Frontier cells clustered 8-connected, nearest cluster first."""
    mask = frontier_mask(online)
    cells = [tuple(rc) for rc in np.argwhere(mask)]
    if not cells:
        return []
    cell_set = set(cells)
    clusters = []
    seen = set()
    for cell in cells:
        if cell in seen:
            continue
        comp = [cell]
        seen.add(cell)
        stack = [cell]
        while stack:
            r, c = stack.pop()
            for dr, dc in grid.NEIGHBORS_8:
                n = (r + dr, c + dc)
                if n in cell_set and n not in seen:
                    seen.add(n)
                    comp.append(n)
                    stack.append(n)
        if len(comp) < MIN_CLUSTER:
            continue
        comp.sort()
        mean = np.array(comp).mean(axis=0)
        centroid = min(comp, key=lambda rc: ((rc[0] - mean[0]) ** 2
                                             + (rc[1] - mean[1]) ** 2, rc))
        clusters.append(FrontierCluster(comp, centroid, len(comp), np.inf))

    passable = online != grid.OCCUPIED
    dist = control.plan_distance_field(passable, [agent_cell], resolution)
    for cl in clusters:
        cl.geodesic = float(dist[cl.centroid])
    clusters = [cl for cl in clusters if np.isfinite(cl.geodesic)]
    clusters.sort(key=lambda cl: (cl.geodesic, cl.centroid))
    return clusters


def update_occupancy(agent):
    """Sensing pass at the current pose (the body also senses after every
    primitive; this exists for explicit refreshes)."""
    agent.sense()


def initial_spin(agent):
    """Full 360-degree spin at episode start; heading is restored by the
    24 equal turns."""
    for _ in range(SPIN_STEPS):
        agent.turn(1)


class Explorer:
    """Search state that survives across calls within one scene run."""

    def __init__(self):
        self.blacklist: set[tuple[int, int]] = set()

    def search_object(self, query: str, agent, registry: ObjectRegistry,
                      provider, rng, cfg: DetectorConfig = DetectorConfig(),
                      exclude_ids: frozenset = frozenset()):
        """Frontier loop with spin-and-detect.

        Returns a list of detections, or EXHAUSTED when no frontiers remain,
        or BUDGET when the round step budget ran out (resumable)."""
        max_visits = agent.online.size
        for _ in range(max_visits):
            if not agent.budget_left():
                return BUDGET
            clusters = [cl for cl in find_frontiers(agent.online,
                                                    agent.pose.cell(agent.resolution),
                                                    agent.resolution)
                        if cl.centroid not in self.blacklist]
            if not clusters:
                return EXHAUSTED
            target = clusters[0].centroid
            nav = control.goto_point(agent, grid.center_of(*target, agent.resolution))
            if nav.blocked:
                self.blacklist.add(target)
                if not agent.budget_left():
                    return BUDGET
                continue
            for _ in range(SPIN_STEPS):
                if not agent.budget_left():
                    return BUDGET
                agent.turn(1)
                dets = detect_object(query, agent, registry, provider, rng, cfg)
                dets = [d for d in dets if d.obj_id not in exclude_ids]
                if dets:
                    return dets
        return EXHAUSTED
