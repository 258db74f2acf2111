"""Navigation metrics: SR, SPL (path-length weighted), SIT (interaction
weighted), plus the ground-truth shortest-path oracle they depend on."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import control, grid
from .scene import GoalSpec, Pose, Scene, goal_success_region


class MetricsError(ValueError):
    pass


@dataclass
class EpisodeResult:
    goal_name: str
    success: int           # S_i in {0, 1}
    actual_path: float     # a_i meters
    shortest_path: float   # l_i meters
    interactions: int      # I_i >= 1
    seed: int = 0
    scene_id: str = ""
    transcript_ref: str | None = None


@dataclass
class MetricsReport:
    n: int
    sr: float   # percentages
    spl: float
    sit: float
    episodes: list[EpisodeResult] = field(default_factory=list)
    config: dict = field(default_factory=dict)


def shortest_path_length(scene: Scene, start: Pose, goal: GoalSpec,
                         radius: float = 1.5) -> float:
    """Geodesic meters from the start cell to the goal's success region on
    the ground-truth grid; 0 when the start is already inside the region."""
    region = goal_success_region(scene, goal, radius)
    passable = scene.occ != grid.OCCUPIED
    dist = control.plan_distance_field(passable, sorted(region), scene.resolution)
    value = dist[start.cell(scene.resolution)]
    if not np.isfinite(value):
        raise MetricsError(f"goal not reachable from start: {goal.name}")
    return float(value)


def compute_metrics(results: list[EpisodeResult],
                    config: dict | None = None) -> MetricsReport:
    """SR = mean(S); SPL = mean(S * l / max(a, l)); SIT = mean(S / I).

    The degenerate l=0 success term counts as 1. Reported as percentages."""
    if not results:
        raise MetricsError("no episode results")
    n = len(results)
    sr = spl = sit = 0.0
    for r in results:
        s = 1.0 if r.success else 0.0
        sr += s
        if s:
            if r.shortest_path == 0.0:
                spl += 1.0
            else:
                spl += r.shortest_path / max(r.actual_path, r.shortest_path)
            if r.interactions < 1:
                raise MetricsError("successful episode with no interaction")
            sit += 1.0 / r.interactions
    return MetricsReport(
        n=n,
        sr=100.0 * sr / n,
        spl=100.0 * spl / n,
        sit=100.0 * sit / n,
        episodes=list(results),
        config=dict(config or {}),
    )
