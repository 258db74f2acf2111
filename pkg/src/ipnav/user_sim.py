"""Simulated user: adjudicates talk attempts against ground truth and
produces feedback utterances plus machine-readable feedback events.

Every utterance comes from a small template family whose surface forms are
losslessly parseable back into the event, so a human typing the same text
steers the agent identically to the simulator (interface transparency).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import control, grid
from .embedding import _fnv1a64
from .scene import (GoalSpec, Pose, Scene, SUCCESS_RADIUS_M, goal_success_region,
                    object_mass_center, mass_center_cell)

REGIMES = ("none", "yesno", "corrective", "descriptive", "landmark",
           "procedural", "mixed")
MIXED_CYCLE = ("corrective", "landmark", "procedural", "descriptive")

TURN_QUANTUM = 15.0
DROP_TURN_BELOW_DEG = 30.0
FORWARD_ROUND_M = 0.5


@dataclass
class FeedbackEvent:
    kind: str  # yesno | corrective | descriptive | landmark | procedural
    payload: dict


@dataclass
class Adjudication:
    success: bool
    reached_gid: str | None
    distance: float


def adjudicate(pose: Pose, goal: GoalSpec, scene: Scene, agent) -> Adjudication:
    """Referee check run on every talk: success needs the goal mass center
    within 1.5 m and visible in the ego view. `reached` is the nearest
    visible object within the radius, for corrective feedback."""
    fan = agent.fan()
    goal_obj = scene.goal_object(goal)
    gx, gy = object_mass_center(scene, goal.target_gid)
    gdist = math.hypot(gx - pose.x, gy - pose.y)
    goal_visible = fan.reach(mass_center_cell(scene, goal.target_gid),
                             agent.camera,
                             transparent=goal_obj.footprint) is not None
    success = gdist <= SUCCESS_RADIUS_M and goal_visible

    reached, best = None, None
    for obj in scene.objects:
        ox, oy = object_mass_center(scene, obj.gid)
        d = math.hypot(ox - pose.x, oy - pose.y)
        if d > SUCCESS_RADIUS_M:
            continue
        if fan.reach(mass_center_cell(scene, obj.gid), agent.camera,
                     transparent=obj.footprint) is None:
            continue
        if best is None or d < best:
            reached, best = obj.gid, d
    return Adjudication(success=success, reached_gid=reached, distance=gdist)


# --- procedural route compression -------------------------------------------

def _douglas_peucker(points: list[tuple[float, float]], eps: float):
    if len(points) < 3:
        return list(points)
    (x0, y0), (x1, y1) = points[0], points[-1]
    dx, dy = x1 - x0, y1 - y0
    norm = math.hypot(dx, dy)
    best_i, best_d = 0, -1.0
    for i in range(1, len(points) - 1):
        px, py = points[i]
        if norm < 1e-12:
            d = math.hypot(px - x0, py - y0)
        else:
            d = abs(dx * (y0 - py) - dy * (x0 - px)) / norm
        if d > best_d:
            best_i, best_d = i, d
    if best_d <= eps:
        return [points[0], points[-1]]
    left = _douglas_peucker(points[:best_i + 1], eps)
    right = _douglas_peucker(points[best_i:], eps)
    return left[:-1] + right


def procedural_instructions(path_cells, pose: Pose, resolution: float):
    """Compress a ground-truth cell path into an approximate spoken route.

    Colinear runs merge (polyline simplification), heading changes under
    30 degrees are dropped, turns quantize to 15 degrees, distances round
    to 0.5 m. Returns (text, payload steps)."""
    if not path_cells or len(path_cells) < 2:
        return "You are right next to it.", []
    points = [(pose.x, pose.y)] + [grid.center_of(r, c, resolution)
                                   for r, c in path_cells[1:]]
    simple = _douglas_peucker(points, eps=1.5 * resolution)
    steps = []
    heading = pose.heading
    for i, ((x0, y0), (x1, y1)) in enumerate(zip(simple, simple[1:])):
        seg_len = math.hypot(x1 - x0, y1 - y0)
        bearing = grid.bearing_to(x0, y0, x1, y1)
        delta = grid.wrap_angle(bearing - heading)
        # the first turn orients the robot and is always issued; later
        # near-colinear wiggles are dropped
        if i == 0 or abs(delta) >= DROP_TURN_BELOW_DEG:
            deg = round(delta / TURN_QUANTUM) * int(TURN_QUANTUM)
            if deg != 0:
                steps.append(["turn", deg])
                heading = grid.normalize_heading(heading + deg)
        dist = round(seg_len / FORWARD_ROUND_M) * FORWARD_ROUND_M
        if dist > 0:
            steps.append(["forward", dist])
    if not steps:
        return "You are right next to it.", []
    return render_route(steps), steps


def _fmt_meters(m: float) -> str:
    return f"{m:g}"


def render_route(steps) -> str:
    parts = []
    for step in steps:
        if step[0] == "turn":
            deg = int(step[1])
            side = "left" if deg > 0 else "right"
            if abs(deg) == 90:
                parts.append(f"turn {side}")
            else:
                parts.append(f"turn {side} {abs(deg)} degrees")
        else:
            parts.append(f"go forward {_fmt_meters(step[1])} meters")
    return ", ".join(parts)


_ROUTE_TURN = re.compile(r"^turn (left|right)(?: (\d+) degrees)?$")
_ROUTE_FWD = re.compile(r"^go forward ([0-9.]+) meters$")


def parse_route(text: str):
    steps = []
    for part in text.split(", "):
        m = _ROUTE_TURN.match(part)
        if m:
            deg = int(m.group(2)) if m.group(2) else 90
            steps.append(["turn", deg if m.group(1) == "left" else -deg])
            continue
        m = _ROUTE_FWD.match(part)
        if m:
            steps.append(["forward", float(m.group(1))])
            continue
        return None
    return steps or None


# --- templates ----------------------------------------------------------------

_SUCCESS = ("Yes, that's {name}. Well done.", "Yes! You found {name}.")
_YESNO = ("No, keep searching.", "No, that's not it. Keep searching.")
_CORRECTIVE = ("No, that is {name}.", "No, that's {name}.")
_DESCRIPTIVE = ("No. {sentence}", "Not this one. {sentence}")
_LANDMARK = ("No. It is near the {cls}.", "No, look near the {cls}.")
_PROCEDURAL = ("No. {route}.", "No, try this: {route}.")


def _variant(seed: int, talk_index: int, kind: str, n: int) -> int:
    return _fnv1a64(f"{seed}:{talk_index}:{kind}".encode()) % n


class TemplateUser:
    """Template-based user for one scene run.

    Descriptive sentences are issued per goal in order without repetition
    until exhausted, then cycle. All choices are deterministic in
    (seed, talk index)."""

    def __init__(self, regime: str, scene: Scene, seed: int = 0):
        if regime not in REGIMES:
            raise ValueError(f"unknown feedback regime: {regime}")
        self.regime = regime
        self.scene = scene
        self.seed = seed
        self._desc_cursor: dict[str, int] = {}

    def respond(self, goal: GoalSpec, agent, adj: Adjudication,
                talk_index: int) -> tuple[str | None, FeedbackEvent | None, bool]:
        """Returns (utterance, event, terminal)."""
        if adj.success:
            v = _variant(self.seed, talk_index, "success", len(_SUCCESS))
            return _SUCCESS[v].format(name=goal.name), None, True
        if self.regime == "none":
            return None, None, True

        kind = self.regime
        if kind == "mixed":
            kind = MIXED_CYCLE[(talk_index - 1) % len(MIXED_CYCLE)]
        if kind == "corrective" and adj.reached_gid == goal.target_gid:
            # the robot is at the right object but missed the formal
            # criterion; denying its identity would be nonsense
            return ("You are right next to it.",
                    FeedbackEvent("procedural", {"steps": []}), False)
        if kind == "corrective" and adj.reached_gid is None:
            kind = "yesno"

        if kind == "yesno":
            v = _variant(self.seed, talk_index, "yesno", len(_YESNO))
            return _YESNO[v], FeedbackEvent("yesno", {}), False

        if kind == "corrective":
            name = self.scene.object_by_gid(adj.reached_gid).personalized_name
            v = _variant(self.seed, talk_index, "corrective", len(_CORRECTIVE))
            return (_CORRECTIVE[v].format(name=name),
                    FeedbackEvent("corrective", {"name": name}), False)

        if kind == "descriptive":
            obj = self.scene.goal_object(goal)
            sentences = obj.descriptions or (f"It is a {obj.class_label}.",)
            cur = self._desc_cursor.get(obj.gid, 0)
            sentence = sentences[cur % len(sentences)]
            self._desc_cursor[obj.gid] = cur + 1
            v = _variant(self.seed, talk_index, "descriptive", len(_DESCRIPTIVE))
            return (_DESCRIPTIVE[v].format(sentence=sentence),
                    FeedbackEvent("descriptive", {"sentence": sentence}), False)

        if kind == "landmark":
            cls = self._nearest_landmark_class(goal)
            if cls is None:
                v = _variant(self.seed, talk_index, "yesno", len(_YESNO))
                return _YESNO[v], FeedbackEvent("yesno", {}), False
            v = _variant(self.seed, talk_index, "landmark", len(_LANDMARK))
            return (_LANDMARK[v].format(cls=cls),
                    FeedbackEvent("landmark", {"class": cls, "relation": "near"}),
                    False)

        # procedural
        text, steps = self._route_to_goal(goal, agent)
        if not steps:
            # already inside the success region; the event still says so
            return text, FeedbackEvent("procedural", {"steps": []}), False
        v = _variant(self.seed, talk_index, "procedural", len(_PROCEDURAL))
        return (_PROCEDURAL[v].format(route=render_route(steps)),
                FeedbackEvent("procedural", {"steps": steps}), False)

    def _nearest_landmark_class(self, goal: GoalSpec) -> str | None:
        gx, gy = object_mass_center(self.scene, goal.target_gid)
        best, best_d = None, None
        for obj in self.scene.objects:
            if not obj.is_landmark or obj.gid == goal.target_gid:
                continue
            ox, oy = object_mass_center(self.scene, obj.gid)
            d = math.hypot(ox - gx, oy - gy)
            if best_d is None or d < best_d:
                best, best_d = obj.class_label, d
        return best

    def _route_to_goal(self, goal: GoalSpec, agent):
        scene = self.scene
        region = goal_success_region(scene, goal)
        passable = scene.occ != grid.OCCUPIED
        dist = control.plan_distance_field(passable, sorted(region), scene.resolution)
        path = control.descend_path(dist, agent.pose.cell(scene.resolution),
                                    scene.resolution, passable)
        if path is None:
            return "You are right next to it.", []
        return procedural_instructions(path, agent.pose, scene.resolution)


# --- text -> event parsing (human mode) --------------------------------------

_RE_CORRECTIVE = re.compile(r"^No, that(?: is|'s) (.+)\.$")
_RE_LANDMARK = re.compile(r"^No(?:\.|,) (?:It is|look) near the (.+)\.$")
_RE_DESC = re.compile(r"^(?:No\.|Not this one\.) (.+)$")
_RE_PROC = re.compile(r"^No(?:\.|, try this:) (.+)\.$")


def parse_feedback_text(text: str):
    """Reconstruct (success, event) from a template-shaped utterance.

    Unrecognized denials degrade to a plain yes/no event; anything opening
    with 'yes' counts as confirmation."""
    stripped = text.strip()
    if stripped.lower().startswith("yes"):
        return True, None
    if stripped in _YESNO:
        return False, FeedbackEvent("yesno", {})
    if stripped == "You are right next to it.":
        return False, FeedbackEvent("procedural", {"steps": []})
    m = _RE_PROC.match(stripped)
    if m:
        steps = parse_route(m.group(1))
        if steps:
            return False, FeedbackEvent("procedural", {"steps": steps})
    m = _RE_LANDMARK.match(stripped)
    if m:
        return False, FeedbackEvent("landmark", {"class": m.group(1), "relation": "near"})
    m = _RE_CORRECTIVE.match(stripped)
    if m:
        return False, FeedbackEvent("corrective", {"name": m.group(1)})
    m = _RE_DESC.match(stripped)
    if m:
        return False, FeedbackEvent("descriptive", {"sentence": m.group(1)})
    return False, FeedbackEvent("yesno", {})
