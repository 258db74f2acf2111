"""Pose kinematics, distance-field planning, and high-level navigation.

Planning runs a multi-source Dijkstra wavefront over the 8-connected grid
(straight cost = resolution, diagonal = sqrt(2) * resolution). On the online
map, unknown cells are traversable (optimistic planning) and collisions
trigger replanning. Path length accounting counts forward translations only;
rotations are free.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import grid

TURN_DEG = 15.0
STEP_M = 0.25
MAX_REPLANS = 3

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PrimitiveAction:
    kind: str  # "turn_left" | "turn_right" | "forward" | "talk"
    content: str | None = None


@dataclass
class NavResult:
    final_pose: "Pose"
    steps_taken: list[PrimitiveAction] = field(default_factory=list)
    distance_traveled: float = 0.0
    blocked: bool = False
    budget_stopped: bool = False  # ran out of round budget, not unreachable


class ControlError(ValueError):
    pass


def quantize_heading(deg: float) -> float:
    """Round to the nearest 15-degree quantum; ties round toward zero."""
    wrapped = grid.wrap_angle(deg)
    q = wrapped / TURN_DEG
    lo, hi = math.floor(q), math.ceil(q)
    if abs(q - lo) < abs(hi - q):
        n = lo
    elif abs(hi - q) < abs(q - lo):
        n = hi
    else:
        n = lo if q >= 0 else hi  # tie: toward zero
    return grid.normalize_heading(n * TURN_DEG)


def apply_primitive(pose, action: PrimitiveAction, occ: np.ndarray, resolution: float):
    """Execute one primitive against an occupancy grid.

    Returns (new_pose, blocked). MoveForward into an occupied or
    out-of-bounds cell leaves the pose unchanged with blocked=True.
    """
    from .scene import Pose

    if action.kind == "turn_left":
        return Pose(pose.x, pose.y, pose.heading + TURN_DEG), False
    if action.kind == "turn_right":
        return Pose(pose.x, pose.y, pose.heading - TURN_DEG), False
    if action.kind == "talk":
        return pose, False
    if action.kind != "forward":
        raise ControlError(f"unknown primitive: {action.kind}")

    h = math.radians(pose.heading)
    nx, ny = pose.x + STEP_M * math.cos(h), pose.y + STEP_M * math.sin(h)
    r, c = grid.cell_of(nx, ny, resolution)
    rows, cols = occ.shape
    if not grid.in_bounds(rows, cols, r, c) or occ[r, c] == grid.OCCUPIED:
        return pose, True
    return Pose(nx, ny, pose.heading), False


def _edge_ok(passable: np.ndarray, r: int, c: int, dr: int, dc: int) -> bool:
    """Diagonal moves may not cut corners: both orthogonal cells must be
    passable, otherwise the 0.25 m executor step can clip the wall."""
    rows, cols = passable.shape
    nr, nc = r + dr, c + dc
    if not grid.in_bounds(rows, cols, nr, nc) or not passable[nr, nc]:
        return False
    if dr and dc and not (passable[r + dr, c] and passable[r, c + dc]):
        return False
    return True


def plan_distance_field(passable: np.ndarray, sources, resolution: float) -> np.ndarray:
    """Multi-source Dijkstra geodesic costs in meters; unreachable = +inf."""
    rows, cols = passable.shape
    dist = np.full((rows, cols), np.inf)
    heap = []
    for (r, c) in sources:
        if not grid.in_bounds(rows, cols, r, c):
            raise ControlError(f"source out of bounds: {(r, c)}")
        if dist[r, c] > 0.0:
            dist[r, c] = 0.0
            heapq.heappush(heap, (0.0, r, c))
    while heap:
        d, r, c = heapq.heappop(heap)
        if d > dist[r, c]:
            continue
        for dr, dc in grid.NEIGHBORS_8:
            if not _edge_ok(passable, r, c, dr, dc):
                continue
            nr, nc = r + dr, c + dc
            step = resolution * (_SQRT2 if dr and dc else 1.0)
            nd = d + step
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, nr, nc))
    return dist


def descend_path(dist: np.ndarray, start: tuple[int, int], resolution: float,
                 passable: np.ndarray) -> list[tuple[int, int]] | None:
    """Steepest-descent cell path from `start` to a zero-cost source along
    legal moves only. None when start is unreachable from the sources."""
    if not np.isfinite(dist[start]):
        return None
    path = [start]
    r, c = start
    while dist[r, c] > 0.0:
        best = None
        best_cost = dist[r, c]
        for dr, dc in grid.NEIGHBORS_8:
            if not _edge_ok(passable, r, c, dr, dc):
                continue
            nr, nc = r + dr, c + dc
            if dist[nr, nc] < best_cost:
                best_cost = dist[nr, nc]
                best = (nr, nc)
        if best is None:  # plateau should not happen on a Dijkstra field
            return None
        r, c = best
        path.append(best)
    return path


def _passable_online(online: np.ndarray) -> np.ndarray:
    return online != grid.OCCUPIED  # unknown treated as traversable


def _face(agent, target_bearing: float) -> None:
    """Rotate in 15-degree quanta until heading matches the quantized bearing."""
    goal = quantize_heading(target_bearing)
    delta = grid.wrap_angle(goal - agent.pose.heading)
    n = int(round(delta / TURN_DEG))
    for i in range(abs(n)):
        if not agent.budget_left():
            agent.sense()
            return
        agent.turn(1 if n > 0 else -1, sense=(i == abs(n) - 1))


def _approach(agent, wx: float, wy: float, tol: float) -> bool:
    """Pure pursuit toward a waypoint; True if reached or skippable,
    False on a collision (caller replans with the newly seen wall)."""
    collisions = 0
    aim_offset = 0.0
    for _ in range(4):  # re-aim attempts
        _face(agent, grid.bearing_to(agent.pose.x, agent.pose.y, wx, wy) + aim_offset)
        aim_offset = 0.0
        while agent.budget_left():
            d = math.hypot(wx - agent.pose.x, wy - agent.pose.y)
            if d <= tol:
                return True
            # step would overshoot into worse position: re-aim or stop
            h = math.radians(agent.pose.heading)
            nd = math.hypot(wx - (agent.pose.x + STEP_M * math.cos(h)),
                            wy - (agent.pose.y + STEP_M * math.sin(h)))
            if nd >= d:
                break
            if agent.forward():
                collisions += 1
                if collisions >= 2:
                    return False  # stuck against walls, caller replans
                # quantized heading clipped a wall: angle away and retry once
                bearing = grid.bearing_to(agent.pose.x, agent.pose.y, wx, wy)
                err = grid.wrap_angle(bearing - agent.pose.heading)
                aim_offset = TURN_DEG if err >= 0 else -TURN_DEG
                break
        if math.hypot(wx - agent.pose.x, wy - agent.pose.y) <= tol:
            return True
        if not agent.budget_left():
            return True  # budget exhausted; treat as soft stop
    # waypoint not converged: replan when walls were involved, else skip it
    return collisions == 0


def goto_point(agent, target_xy: tuple[float, float], on_scene_grid: bool = False) -> NavResult:
    """Navigate to a world point via the distance field.

    Plans on the agent's online map by default (unknown = traversable) and
    replans up to MAX_REPLANS times when a forward step collides; collision
    cells are written into the online map so replans route around them.
    Succeeds when the final pose is within one cell of the target.
    """
    start_traveled = agent.traveled
    start_steps = len(agent.step_log)
    res = agent.resolution
    tx, ty = target_xy
    target_cell = grid.cell_of(tx, ty, res)
    rows, cols = agent.scene.occ.shape
    if not grid.in_bounds(rows, cols, *target_cell):
        return NavResult(agent.pose, [], 0.0, blocked=True)

    def result(blocked: bool) -> NavResult:
        return NavResult(
            final_pose=agent.pose,
            steps_taken=agent.step_log[start_steps:],
            distance_traveled=agent.traveled - start_traveled,
            blocked=blocked,
            budget_stopped=blocked and not agent.budget_left(),
        )

    # replans that made no forward progress count toward the cap; a long
    # route through unknown space may legitimately replan many times
    fruitless = 0
    while fruitless <= MAX_REPLANS:
        if on_scene_grid:
            passable = agent.scene.occ != grid.OCCUPIED
        else:
            passable = _passable_online(agent.online)
        if not passable[target_cell]:
            return result(True)
        dist = plan_distance_field(passable, [target_cell], res)
        path = descend_path(dist, agent.pose.cell(res), res, passable)
        if path is None:
            return result(True)
        collided = False
        traveled_before = agent.traveled
        for (r, c) in path[1:]:
            wx, wy = grid.center_of(r, c, res)
            if not _approach(agent, wx, wy, tol=0.6 * res):
                collided = True
                break
            if not agent.budget_left():
                return result(math.hypot(tx - agent.pose.x, ty - agent.pose.y) > res)
        if not collided:
            # final touch-up toward the exact point
            _approach(agent, tx, ty, tol=res)
            return result(math.hypot(tx - agent.pose.x, ty - agent.pose.y) > res)
        if agent.traveled == traveled_before:
            fruitless += 1
        else:
            fruitless = 0
    return result(True)


def goto_object(agent, obj_id: str, registry, success_radius: float = 1.5) -> NavResult:
    """Approach a registered object: nearest free cell within the success
    radius of its region centroid that has line-of-sight, then face it."""
    entry = registry.get(obj_id)  # raises on unknown id
    res = agent.resolution
    start_traveled = agent.traveled
    start_steps = len(agent.step_log)
    cx, cy = registry.region_centroid(obj_id, res)
    target_cell = grid.cell_of(cx, cy, res)
    region = entry.region

    occ = agent.scene.occ
    rows, cols = occ.shape
    # stay a cell inside the radius: goto_point may stop up to one cell
    # short of the approach cell, and the confirm must land within range
    reach_radius = max(res, success_radius - res)
    r_cells = int(np.ceil(reach_radius / res)) + 1
    tr, tc = target_cell
    candidates = []
    for r in range(max(0, tr - r_cells), min(rows, tr + r_cells + 1)):
        for c in range(max(0, tc - r_cells), min(cols, tc + r_cells + 1)):
            if occ[r, c] == grid.OCCUPIED:
                continue
            x, y = grid.center_of(r, c, res)
            if (x - cx) ** 2 + (y - cy) ** 2 > reach_radius ** 2:
                continue
            if _los_to_region(occ, res, x, y, target_cell, region):
                candidates.append((r, c))
    if not candidates:
        return NavResult(agent.pose, [], 0.0, blocked=True)

    passable = _passable_online(agent.online)
    dist = plan_distance_field(passable, [agent.pose.cell(res)], res)
    candidates.sort(key=lambda rc: (dist[rc], rc))
    if not np.isfinite(dist[candidates[0]]):
        return NavResult(agent.pose, [], 0.0, blocked=True)

    nav = goto_point(agent, grid.center_of(*candidates[0], res))
    _face(agent, grid.bearing_to(agent.pose.x, agent.pose.y, cx, cy))
    return NavResult(
        final_pose=agent.pose,
        steps_taken=agent.step_log[start_steps:],
        distance_traveled=agent.traveled - start_traveled,
        blocked=nav.blocked,
        budget_stopped=nav.budget_stopped,
    )


def _los_to_region(occ: np.ndarray, res: float, x: float, y: float,
                   target_cell: tuple[int, int], region) -> bool:
    """Straight-line visibility: the segment to the target cell center may
    cross region cells but no other occupied cell."""
    tx, ty = grid.center_of(*target_cell, res)
    length = math.hypot(tx - x, ty - y)
    if length < 1e-9:
        return True
    n = max(2, int(length / (res * 0.25)))
    rows, cols = occ.shape
    for i in range(1, n + 1):
        px, py = x + (tx - x) * i / n, y + (ty - y) * i / n
        r, c = grid.cell_of(px, py, res)
        if not grid.in_bounds(rows, cols, r, c):
            return False
        if (r, c) == target_cell or (r, c) in region:
            return True
        if occ[r, c] == grid.OCCUPIED:
            return False
    return True
