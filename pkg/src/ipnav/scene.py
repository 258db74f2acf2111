"""Static environment: occupancy grid, rooms, objects, personalized goals.

Scenes are immutable after load and safe to share across threads. The file
format is a strict JSON schema; unknown fields are rejected so that typos
fail loudly instead of silently changing behavior.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import grid, raycast
from .tokens import tokenize

SUCCESS_RADIUS_M = 1.5
HEADING_QUANTUM_DEG = 15.0


class SceneError(ValueError):
    """Parse failure or invariant violation, message names the failed check."""


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", grid.normalize_heading(self.heading))

    def cell(self, resolution: float) -> tuple[int, int]:
        return grid.cell_of(self.x, self.y, resolution)


@dataclass(frozen=True)
class Room:
    name: str
    rect: tuple[int, int, int, int]  # r0, c0, r1, c1 inclusive


@dataclass(frozen=True)
class SceneObject:
    gid: str
    class_label: str
    personalized_name: str
    room: str
    footprint: frozenset[tuple[int, int]]
    visual_tokens: frozenset[str]
    is_landmark: bool = False
    descriptions: tuple[str, ...] = ()

    def visual_phrase(self) -> str:
        return " ".join(sorted(self.visual_tokens))


@dataclass(frozen=True)
class GoalSpec:
    type: str
    name: str
    room: str
    target_gid: str


@dataclass
class Scene:
    id: str
    resolution: float
    occ: np.ndarray  # uint8, grid.FREE / grid.OCCUPIED
    rooms: list[Room]
    objects: list[SceneObject]
    goals: list[GoalSpec]
    start: Pose
    _region_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def rows(self) -> int:
        return int(self.occ.shape[0])

    @property
    def cols(self) -> int:
        return int(self.occ.shape[1])

    def object_by_gid(self, gid: str) -> SceneObject:
        for obj in self.objects:
            if obj.gid == gid:
                return obj
        raise SceneError(f"unknown gid: {gid}")

    def goal_object(self, goal: GoalSpec) -> SceneObject:
        return self.object_by_gid(goal.target_gid)

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return (
            self.id == other.id
            and self.resolution == other.resolution
            and np.array_equal(self.occ, other.occ)
            and self.rooms == other.rooms
            and self.objects == other.objects
            and self.goals == other.goals
            and self.start == other.start
        )


def object_mass_center(scene: Scene, gid: str) -> tuple[float, float]:
    """Centroid of footprint cell centers, in meters."""
    obj = scene.object_by_gid(gid)
    centers = np.array([grid.center_of(r, c, scene.resolution) for r, c in obj.footprint])
    x, y = centers.mean(axis=0)
    return float(x), float(y)


def mass_center_cell(scene: Scene, gid: str) -> tuple[int, int]:
    x, y = object_mass_center(scene, gid)
    return grid.cell_of(x, y, scene.resolution)


def goal_success_region(scene: Scene, goal: GoalSpec,
                        radius: float = SUCCESS_RADIUS_M,
                        camera: raycast.CameraModel = raycast.CameraModel()
                        ) -> frozenset[tuple[int, int]]:
    """Free cells within `radius` of the goal's mass center from which the
    mass-center cell is visible for at least one of the 24 discrete headings.

    Raises if the region is empty (goal cannot be confirmed anywhere).
    """
    key = (goal.target_gid, radius)
    cached = scene._region_cache.get(key)
    if cached is not None:
        return cached

    mx, my = object_mass_center(scene, goal.target_gid)
    footprint = scene.goal_object(goal).footprint
    target = grid.cell_of(mx, my, scene.resolution)
    caster = raycast.default_caster(camera)
    cells = []
    r_cells = int(np.ceil(radius / scene.resolution)) + 1
    tr, tc = target
    for r in range(max(0, tr - r_cells), min(scene.rows, tr + r_cells + 1)):
        for c in range(max(0, tc - r_cells), min(scene.cols, tc + r_cells + 1)):
            if scene.occ[r, c] != grid.FREE:
                continue
            x, y = grid.center_of(r, c, scene.resolution)
            if (x - mx) ** 2 + (y - my) ** 2 > radius * radius:
                continue
            bearing = grid.bearing_to(x, y, mx, my)
            heading = round(bearing / HEADING_QUANTUM_DEG) * HEADING_QUANTUM_DEG
            fan = caster.cast(scene.occ, scene.resolution, x, y, heading)
            if fan.reach(target, camera, transparent=footprint) is not None:
                cells.append((r, c))
    if not cells:
        raise SceneError(f"goal unreachable by success criteria: {goal.name}")
    region = frozenset(cells)
    scene._region_cache[key] = region
    return region


# --- serialization ----------------------------------------------------------

_SCENE_KEYS = {"id", "resolution", "grid", "rooms", "objects", "goals", "start"}
_ROOM_KEYS = {"name", "rect"}
_OBJECT_KEYS = {"gid", "class", "name", "room", "footprint", "visual_tokens",
                "landmark", "descriptions"}
_GOAL_KEYS = {"type", "name", "room", "target_gid"}
_START_KEYS = {"x", "y", "heading"}


def _check_keys(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise SceneError(f"unknown fields in {where}: {sorted(unknown)}")


def load_scene(text: str) -> Scene:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"scene parse error at line {e.lineno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise SceneError("scene file must be a JSON object")
    _check_keys(doc, _SCENE_KEYS, "scene")
    missing = _SCENE_KEYS - set(doc)
    if missing:
        raise SceneError(f"missing fields in scene: {sorted(missing)}")

    rows_text = doc["grid"]
    if not rows_text or any(len(row) != len(rows_text[0]) for row in rows_text):
        raise SceneError("grid rows must be non-empty and equal length")
    occ = np.zeros((len(rows_text), len(rows_text[0])), dtype=np.uint8)
    for r, row in enumerate(rows_text):
        for c, ch in enumerate(row):
            if ch == "#":
                occ[r, c] = grid.OCCUPIED
            elif ch != ".":
                raise SceneError(f"grid char {ch!r} at row {r} col {c} (want '.' or '#')")

    rooms = []
    for i, rm in enumerate(doc["rooms"]):
        _check_keys(rm, _ROOM_KEYS, f"rooms[{i}]")
        rooms.append(Room(name=rm["name"], rect=tuple(int(v) for v in rm["rect"])))

    objects = []
    for i, ob in enumerate(doc["objects"]):
        _check_keys(ob, _OBJECT_KEYS, f"objects[{i}]")
        objects.append(SceneObject(
            gid=ob["gid"],
            class_label=ob["class"],
            personalized_name=ob["name"],
            room=ob["room"],
            footprint=frozenset((int(r), int(c)) for r, c in ob["footprint"]),
            visual_tokens=frozenset(ob["visual_tokens"]),
            is_landmark=bool(ob.get("landmark", False)),
            descriptions=tuple(ob.get("descriptions", [])),
        ))

    goals = []
    for i, g in enumerate(doc["goals"]):
        _check_keys(g, _GOAL_KEYS, f"goals[{i}]")
        goals.append(GoalSpec(type=g["type"], name=g["name"], room=g["room"],
                              target_gid=g["target_gid"]))

    st = doc["start"]
    _check_keys(st, _START_KEYS, "start")
    scene = Scene(
        id=doc["id"],
        resolution=float(doc["resolution"]),
        occ=occ,
        rooms=rooms,
        objects=objects,
        goals=goals,
        start=Pose(float(st["x"]), float(st["y"]), float(st["heading"])),
    )
    validate_scene(scene)
    return scene


def save_scene(scene: Scene) -> str:
    doc = {
        "id": scene.id,
        "resolution": scene.resolution,
        "grid": ["".join("#" if scene.occ[r, c] else "." for c in range(scene.cols))
                 for r in range(scene.rows)],
        "rooms": [{"name": rm.name, "rect": list(rm.rect)} for rm in scene.rooms],
        "objects": [{
            "gid": ob.gid,
            "class": ob.class_label,
            "name": ob.personalized_name,
            "room": ob.room,
            "footprint": sorted([list(rc) for rc in ob.footprint]),
            "visual_tokens": sorted(ob.visual_tokens),
            "landmark": ob.is_landmark,
            "descriptions": list(ob.descriptions),
        } for ob in scene.objects],
        "goals": [{"type": g.type, "name": g.name, "room": g.room,
                   "target_gid": g.target_gid} for g in scene.goals],
        "start": {"x": scene.start.x, "y": scene.start.y, "heading": scene.start.heading},
    }
    return json.dumps(doc, indent=1)


# --- validation -------------------------------------------------------------

def validate_scene(scene: Scene):
    """Check every structural invariant; raise SceneError naming the check."""
    rows, cols = scene.rows, scene.cols

    for rm in scene.rooms:
        r0, c0, r1, c1 = rm.rect
        if not (0 <= r0 <= r1 < rows and 0 <= c0 <= c1 < cols):
            raise SceneError(f"room out of bounds: {rm.name}")

    gids = [ob.gid for ob in scene.objects]
    if len(gids) != len(set(gids)):
        raise SceneError("duplicate object gid")

    for ob in scene.objects:
        if not ob.footprint:
            raise SceneError(f"empty footprint: {ob.gid}")
        for r, c in ob.footprint:
            if not grid.in_bounds(rows, cols, r, c):
                raise SceneError(f"footprint out of bounds: {ob.gid}")
            if scene.occ[r, c] != grid.OCCUPIED:
                raise SceneError(f"footprint cell not occupied: {ob.gid} at ({r},{c})")
        class_toks = set(tokenize(ob.class_label))
        if not class_toks <= ob.visual_tokens:
            raise SceneError(f"class tokens not visible: {ob.gid}")
        personal = set(tokenize(ob.personalized_name)) - class_toks
        if personal & ob.visual_tokens:
            raise SceneError(f"personalized tokens leaked into visual tokens: {ob.gid}")

    names = [g.name for g in scene.goals]
    if len(names) != len(set(names)):
        raise SceneError("duplicate goal name")
    for g in scene.goals:
        matches = [ob for ob in scene.objects if ob.gid == g.target_gid]
        if len(matches) != 1:
            raise SceneError(f"goal target does not resolve: {g.name}")
        if matches[0].class_label != g.type:
            raise SceneError(f"goal type mismatch: {g.name}")

    sr, sc = scene.start.cell(scene.resolution)
    if not grid.in_bounds(rows, cols, sr, sc) or scene.occ[sr, sc] != grid.FREE:
        raise SceneError("start pose cell not free")

    reach = grid.reachable_mask(scene.occ, (sr, sc))
    for g in scene.goals:
        region = goal_success_region(scene, g)
        if not any(reach[r, c] for r, c in region):
            raise SceneError(f"unreachable goal: {g.name}")
