"""Embodied agent state for one scene run: pose, online map, sensing.

The body executes primitive actions against the ground-truth grid, keeps
path-length accounting (forward translations only), and refreshes the
online occupancy map after every primitive so planning always sees the
latest knowledge. A per-talk-round step budget bounds how much motion any
single decision round may spend.
"""

from __future__ import annotations

import math

import numpy as np

from . import control, grid, raycast
from .scene import Pose, Scene

DEFAULT_ROUND_STEP_CAP = 200


class AgentBody:
    def __init__(self, scene: Scene, camera: raycast.CameraModel = raycast.CameraModel(),
                 round_step_cap: int = DEFAULT_ROUND_STEP_CAP,
                 start: Pose | None = None):
        self.scene = scene
        self.camera = camera
        self.caster = raycast.default_caster(camera)
        self.pose = start if start is not None else scene.start
        self.online = np.full(scene.occ.shape, grid.UNKNOWN, dtype=np.int8)
        self.traveled = 0.0
        self.round_steps = 0
        self.round_step_cap = round_step_cap
        self.step_log: list[control.PrimitiveAction] = []
        self._fan_cache: tuple[tuple[float, float, float], raycast.FanView] | None = None
        self.trajectory: list[tuple[float, float]] = [(self.pose.x, self.pose.y)]
        self.sense()

    @property
    def resolution(self) -> float:
        return self.scene.resolution

    def budget_left(self) -> bool:
        return self.round_steps < self.round_step_cap

    def reset_round(self):
        self.round_steps = 0

    # -- sensing --------------------------------------------------------

    def fan(self) -> raycast.FanView:
        key = (self.pose.x, self.pose.y, self.pose.heading)
        if self._fan_cache is None or self._fan_cache[0] != key:
            view = self.caster.cast(self.scene.occ, self.resolution,
                                    self.pose.x, self.pose.y, self.pose.heading)
            self._fan_cache = (key, view)
        return self._fan_cache[1]

    def sense(self):
        fan = self.fan()
        fan.write_occupancy(self.online)
        self.online[self.pose.cell(self.resolution)] = grid.FREE

    # -- primitives -------------------------------------------------------

    def turn(self, sign: int, sense: bool = True):
        """sign > 0 turns left (counterclockwise), sign < 0 turns right.

        Callers spinning through intermediate headings may defer sensing
        to the final orientation."""
        kind = "turn_left" if sign > 0 else "turn_right"
        act = control.PrimitiveAction(kind)
        self.pose, _ = control.apply_primitive(self.pose, act, self.scene.occ,
                                               self.resolution)
        self.step_log.append(act)
        self.round_steps += 1
        if sense:
            self.sense()

    def forward(self) -> bool:
        """One MoveForward; returns True when blocked by a wall."""
        act = control.PrimitiveAction("forward")
        new_pose, blocked = control.apply_primitive(self.pose, act, self.scene.occ,
                                                    self.resolution)
        self.step_log.append(act)
        self.round_steps += 1
        if blocked:
            # write the obstacle into the online map so replans avoid it
            h = math.radians(self.pose.heading)
            bx = self.pose.x + control.STEP_M * math.cos(h)
            by = self.pose.y + control.STEP_M * math.sin(h)
            r, c = grid.cell_of(bx, by, self.resolution)
            if grid.in_bounds(*self.online.shape, r, c):
                self.online[r, c] = grid.OCCUPIED
            return True
        self.pose = new_pose
        self.traveled += control.STEP_M
        self.trajectory.append((self.pose.x, self.pose.y))
        self.sense()
        return False
