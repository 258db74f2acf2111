"""Procedural benchmark scenes.

Rooms come from recursive splits with doorways, objects are placed with a
one-cell gap so map contours never merge, and goal difficulty is shaped
deliberately: lookalike instances of a class share identical visual
attributes and differ only in their personalized names, while "cluttered"
objects get enough extra attributes that a generic class query scores
below the map threshold and the agent must explore and lean on feedback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import grid
from .embedding import SyntheticProvider, cosine
from .scene import GoalSpec, Pose, Room, Scene, SceneObject, validate_scene

MIN_ROOM_SIDE = 7
DOOR_WIDTH = 2

LOOKALIKE_CLASSES = ("computer", "mug", "lamp", "monitor", "chair")
SINGLE_CLASSES = ("plant", "printer", "television", "bookshelf", "radio",
                  "clock", "guitar", "camera", "backpack", "speaker",
                  "fan", "kettle", "toaster", "easel", "globe")
LANDMARK_CLASSES = ("fridge", "sofa", "piano", "bed", "bathtub")
ATTRIBUTES = ("black", "white", "red", "blue", "green", "silver", "wooden",
              "gray", "small", "large", "round", "tall", "shiny", "old",
              "modern", "dusty", "striped", "matte")
OWNERS = ("alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi",
          "ivan", "judy")
STORES = ("ikea", "amazon", "costco")
ROOM_NAMES = ("living room", "kitchen", "office", "bedroom", "studio",
              "hallway", "den", "library")

EASY_BAND = (0.60, 1.01)     # class-query cosine for map-retrievable objects
HARD_BAND = (0.36, 0.46)     # below the map threshold, detectable with luck
HARD_LOOKALIKE_BAND = (0.45, 0.50)  # map-invisible yet findable by detection


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class GenParams:
    rows: int = 40
    cols: int = 40
    resolution: float = 0.25
    n_rooms: int = 5
    n_objects: int = 15
    lookalike_counts: tuple[int, ...] = (6, 2)
    hard_lookalikes: bool = True  # first lookalike class gets rich visuals
    n_landmarks: int = 3
    n_hard: int = 1
    n_goals: int = 10
    min_lookalike_separation: float = 3.2  # > 2 x success radius


def generate_scene(seed: int, params: GenParams = GenParams()) -> Scene:
    """Deterministic in (seed, params); retries sub-layouts until valid."""
    if params.n_rooms < 1 or params.n_objects < 1:
        raise GenerationError("params must be positive")
    if not params.lookalike_counts or max(params.lookalike_counts) < 2:
        raise GenerationError("need at least one class with >= 2 instances")
    last_err = None
    for attempt in range(30):
        rng = np.random.default_rng((seed + 1) * 1000 + attempt)
        try:
            scn = _generate_once(seed, params, rng)
            validate_scene(scn)
            return scn
        except Exception as e:  # noqa: BLE001 - retry any layout failure
            last_err = e
    raise GenerationError(f"could not generate a valid scene: {last_err}")


def _split_rooms(occ: np.ndarray, n_rooms: int, rng):
    """Recursive splits with doorways; returns (regions, door cells)."""
    rows, cols = occ.shape
    occ[0, :] = occ[-1, :] = grid.OCCUPIED
    occ[:, 0] = occ[:, -1] = grid.OCCUPIED
    regions = [(1, 1, rows - 2, cols - 2)]
    doors: set = set()
    while len(regions) < n_rooms:
        regions.sort(key=lambda rc: -(rc[2] - rc[0]) * (rc[3] - rc[1]))
        r0, c0, r1, c1 = regions[0]
        h, w = r1 - r0 + 1, c1 - c0 + 1
        if max(h, w) < 2 * MIN_ROOM_SIDE + 1:
            break
        regions.pop(0)
        if h >= w:
            cut = int(rng.integers(r0 + MIN_ROOM_SIDE, r1 - MIN_ROOM_SIDE + 1))
            occ[cut, c0:c1 + 1] = grid.OCCUPIED
            door = int(rng.integers(c0 + 1, c1 - DOOR_WIDTH))
            occ[cut, door:door + DOOR_WIDTH] = grid.FREE
            doors.update((cut, cc) for cc in range(door, door + DOOR_WIDTH))
            regions += [(r0, c0, cut - 1, c1), (cut + 1, c0, r1, c1)]
        else:
            cut = int(rng.integers(c0 + MIN_ROOM_SIDE, c1 - MIN_ROOM_SIDE + 1))
            occ[r0:r1 + 1, cut] = grid.OCCUPIED
            door = int(rng.integers(r0 + 1, r1 - DOOR_WIDTH))
            occ[door:door + DOOR_WIDTH, cut] = grid.FREE
            doors.update((rr, cut) for rr in range(door, door + DOOR_WIDTH))
            regions += [(r0, c0, r1, cut - 1), (r0, cut + 1, r1, c1)]
    return regions, doors


def _place_footprint(occ: np.ndarray, room, shape, rng, taken: set,
                     doors: set, tries: int = 60):
    """A footprint whose 8-neighborhood stays clear of other objects and
    doorways so contours stay separate and doors stay passable."""
    r0, c0, r1, c1 = room
    h, w = shape
    rows, cols = occ.shape
    for _ in range(tries):
        rr = int(rng.integers(r0, r1 - h + 2))
        cc = int(rng.integers(c0, c1 - w + 2))
        cells = {(r, c) for r in range(rr, rr + h) for c in range(cc, cc + w)}
        ok = True
        for (r, c) in cells:
            if occ[r, c] != grid.FREE:
                ok = False
                break
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    nr, nc = r + dr, c + dc
                    if (nr, nc) in cells:
                        continue
                    if not grid.in_bounds(rows, cols, nr, nc):
                        continue
                    if (nr, nc) in taken or (nr, nc) in doors:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            return cells
    return None


def _pick_visual(cls: str, rng, provider, band, attr_count) -> frozenset[str]:
    lo, hi = band
    cls_vec = provider.embed(cls)
    for _ in range(300):
        k = int(rng.integers(*attr_count))
        attrs = rng.choice(len(ATTRIBUTES), size=k, replace=False)
        toks = frozenset({cls} | {ATTRIBUTES[i] for i in attrs})
        c = cosine(cls_vec, provider.embed(" ".join(sorted(toks))))
        if lo <= c < hi:
            return toks
    raise GenerationError(f"no attribute set hits band {band} for {cls}")


def _descriptions(cls: str, visual: frozenset[str], rng) -> tuple[str, ...]:
    attrs = sorted(visual - {cls})
    order = list(rng.permutation(len(attrs)))
    out = []
    for i in order[:3]:
        out.append(f"It is a {attrs[i]} {cls}.")
    return tuple(out) if out else (f"It is a {cls}.",)


def _generate_once(seed: int, params: GenParams, rng) -> Scene:
    provider = SyntheticProvider()
    occ = np.full((params.rows, params.cols), grid.FREE, dtype=np.uint8)
    regions, doors = _split_rooms(occ, params.n_rooms, rng)
    room_names = list(ROOM_NAMES[:len(regions)])
    rooms = [Room(name=nm, rect=reg) for nm, reg in zip(room_names, regions)]

    objects: list[SceneObject] = []
    taken: set = set()
    gid_counter = [0]

    def add_object(cls, name, visual, room_idx, shape, landmark=False,
                   min_sep_from: list = ()):  # returns SceneObject or None
        for ridx in _room_order(room_idx, len(rooms), rng):
            cells = _place_footprint(occ, rooms[ridx].rect, shape, rng, taken, doors)
            if cells is None:
                continue
            center = np.array([grid.center_of(r, c, params.resolution)
                               for r, c in cells]).mean(axis=0)
            if min_sep_from and any(
                    math.hypot(center[0] - ox, center[1] - oy)
                    < params.min_lookalike_separation for ox, oy in min_sep_from):
                continue
            for rc in cells:
                occ[rc] = grid.OCCUPIED
            taken.update(cells)
            gid_counter[0] += 1
            obj = SceneObject(
                gid=f"g{gid_counter[0]:03d}",
                class_label=cls,
                personalized_name=name,
                room=rooms[ridx].name,
                footprint=frozenset(cells),
                visual_tokens=visual,
                is_landmark=landmark,
                descriptions=_descriptions(cls, visual, rng),
            )
            objects.append(obj)
            return obj
        return None

    goal_objs: list[SceneObject] = []

    # lookalike groups: identical visuals, distinct personalized names; the
    # first group may carry rich visuals that a bare class query cannot pull
    # off the map, forcing exploration plus user feedback to tell them apart
    for gi, count in enumerate(params.lookalike_counts):
        cls = LOOKALIKE_CLASSES[gi % len(LOOKALIKE_CLASSES)]
        if gi == 0 and params.hard_lookalikes:
            visual = _pick_visual(cls, rng, provider, HARD_LOOKALIKE_BAND, (3, 6))
        else:
            visual = _pick_visual(cls, rng, provider, EASY_BAND, (1, 3))
        owners = list(rng.permutation(len(OWNERS)))[:count]
        centers = []
        for k in range(count):
            name = f"{OWNERS[owners[k]]}'s {cls}"
            # pair instances into shared rooms so nearby twins force the
            # user's feedback to do the disambiguating
            obj = add_object(cls, name, visual, (k // 2) % len(rooms),
                             _shape(rng), min_sep_from=centers)
            if obj is None:
                raise GenerationError("could not separate lookalikes")
            ctr = np.array([grid.center_of(r, c, params.resolution)
                            for r, c in obj.footprint]).mean(axis=0)
            centers.append((float(ctr[0]), float(ctr[1])))
            goal_objs.append(obj)

    # hard singles: visuals that a bare class query cannot pull off the map
    singles = list(rng.permutation(len(SINGLE_CLASSES)))
    si = 0
    for _ in range(params.n_hard):
        cls = SINGLE_CLASSES[singles[si]]
        si += 1
        visual = _pick_visual(cls, rng, provider, HARD_BAND, (3, 6))
        store = STORES[int(rng.integers(0, len(STORES)))]
        obj = add_object(cls, f"{cls} from {store}", visual,
                         int(rng.integers(0, len(rooms))), _shape(rng))
        if obj is None:
            raise GenerationError("no room for hard object")
        goal_objs.append(obj)

    # easy singles to round out the goal list
    n_easy = max(0, params.n_goals - len(goal_objs))
    for _ in range(n_easy):
        cls = SINGLE_CLASSES[singles[si]]
        si += 1
        visual = _pick_visual(cls, rng, provider, EASY_BAND, (1, 3))
        owner = OWNERS[int(rng.integers(0, len(OWNERS)))]
        obj = add_object(cls, f"{owner}'s {cls}", visual,
                         int(rng.integers(0, len(rooms))), _shape(rng))
        if obj is None:
            raise GenerationError("no room for object")
        goal_objs.append(obj)

    # landmarks: big, generic, never goals
    for li in range(params.n_landmarks):
        cls = LANDMARK_CLASSES[li % len(LANDMARK_CLASSES)]
        visual = _pick_visual(cls, rng, provider, EASY_BAND, (1, 2))
        obj = add_object(cls, f"the {cls}", visual, li % len(rooms),
                         (2, 2), landmark=True)
        if obj is None:
            raise GenerationError("no room for landmark")

    # filler objects up to n_objects
    while len(objects) < params.n_objects and si < len(singles):
        cls = SINGLE_CLASSES[singles[si]]
        si += 1
        visual = _pick_visual(cls, rng, provider, EASY_BAND, (1, 3))
        owner = OWNERS[int(rng.integers(0, len(OWNERS)))]
        add_object(cls, f"{owner}'s {cls}", visual,
                   int(rng.integers(0, len(rooms))), (1, 2))

    goals = [GoalSpec(type=o.class_label, name=o.personalized_name,
                      room=o.room, target_gid=o.gid) for o in goal_objs]
    order = list(rng.permutation(len(goals)))
    goals = [goals[i] for i in order[:params.n_goals]]

    start = _start_pose(occ, taken, params.resolution, rng)
    return Scene(
        id=f"scene_{seed:04d}",
        resolution=params.resolution,
        occ=occ,
        rooms=rooms,
        objects=objects,
        goals=goals,
        start=start,
    )


def _shape(rng) -> tuple[int, int]:
    return [(1, 2), (2, 1), (2, 2)][int(rng.integers(0, 3))]


def _room_order(preferred: int, n: int, rng) -> list[int]:
    rest = [i for i in range(n) if i != preferred]
    return [preferred] + list(int(i) for i in rng.permutation(rest))


def _start_pose(occ: np.ndarray, taken: set, resolution: float, rng) -> Pose:
    rows, cols = occ.shape
    for _ in range(500):
        r = int(rng.integers(1, rows - 1))
        c = int(rng.integers(1, cols - 1))
        if occ[r, c] != grid.FREE:
            continue
        clear = all(
            grid.in_bounds(rows, cols, r + dr, c + dc)
            and occ[r + dr, c + dc] == grid.FREE
            for dr in (-1, 0, 1) for dc in (-1, 0, 1))
        if not clear:
            continue
        x, y = grid.center_of(r, c, resolution)
        heading = 15.0 * int(rng.integers(0, 24))
        return Pose(x, y, heading)
    raise GenerationError("no free start cell with clearance")


def benchmark_params() -> GenParams:
    """Defaults for the 10-scene evaluation suite."""
    return GenParams()


def benchmark_scenes(n_scenes: int = 10,
                     params: GenParams | None = None) -> list[Scene]:
    p = params or benchmark_params()
    return [generate_scene(seed, p) for seed in range(n_scenes)]
