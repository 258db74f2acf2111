import math

import numpy as np
import pytest

from ipnav import grid
from ipnav.metrics import (EpisodeResult, MetricsError, compute_metrics,
                           shortest_path_length)
from ipnav.scene import Pose, goal_success_region
from ipnav.scenegen import generate_scene


def ep(s, a, l, i):
    return EpisodeResult("g", s, a, l, i)


def test_hand_derived_example():
    results = [ep(1, 5.0, 4.0, 1), ep(0, 2.0, 2.0, 3), ep(1, 10.0, 5.0, 5)]
    m = compute_metrics(results)
    assert m.sr == pytest.approx(100 * 2 / 3, abs=1e-9)
    assert m.spl == pytest.approx(100 * (0.8 + 0.5) / 3, abs=1e-9)
    assert m.sit == pytest.approx(100 * (1 + 0.2) / 3, abs=1e-9)


def test_perfect_run():
    results = [ep(1, 3.0, 3.0, 1) for _ in range(4)]
    m = compute_metrics(results)
    assert m.sr == m.spl == m.sit == 100.0


def test_degenerate_zero_length_success():
    m = compute_metrics([ep(1, 0.0, 0.0, 1)])
    assert m.spl == 100.0


def test_empty_results_rejected():
    with pytest.raises(MetricsError):
        compute_metrics([])


def test_permutation_invariance():
    rng = np.random.default_rng(0)
    results = [ep(int(rng.integers(0, 2)), float(rng.uniform(0, 10)),
                  float(rng.uniform(0.1, 10)), int(rng.integers(1, 6)))
               for _ in range(50)]
    m1 = compute_metrics(results)
    shuffled = list(results)
    rng.shuffle(shuffled)
    m2 = compute_metrics(shuffled)
    assert (m1.sr, m1.spl, m1.sit) == (m2.sr, m2.spl, m2.sit)


def test_spl_sit_bounded_by_sr_fuzz():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        n = int(rng.integers(1, 12))
        results = [ep(int(rng.integers(0, 2)), float(rng.uniform(0, 30)),
                      float(rng.uniform(0, 20)), int(rng.integers(1, 6)))
                   for _ in range(n)]
        m = compute_metrics(results)
        assert m.spl <= m.sr + 1e-9
        assert m.sit <= m.sr + 1e-9
        assert 0.0 <= m.sr <= 100.0


def test_shortest_path_inside_region_is_zero():
    scn = generate_scene(0)
    goal = scn.goals[0]
    region = goal_success_region(scn, goal)
    cell = sorted(region)[0]
    pose = Pose(*grid.center_of(*cell, scn.resolution), 0.0)
    assert shortest_path_length(scn, pose, goal) == 0.0


def test_shortest_path_matches_bruteforce():
    from oracles import bellman_ford_costs
    scn = generate_scene(0)
    goal = scn.goals[0]
    region = goal_success_region(scn, goal)
    passable = scn.occ != grid.OCCUPIED
    oracle = bellman_ford_costs(passable, sorted(region), scn.resolution)
    value = shortest_path_length(scn, scn.start, goal)
    assert value == pytest.approx(oracle[scn.start.cell(scn.resolution)])


def test_straight_corridor_length():
    import json
    from ipnav.scene import load_scene
    rows = ["#" * 16]
    for _ in range(3):
        rows.append("#" + "." * 14 + "#")
    rows.append("#" * 16)
    rows[2] = "#............##"[:15] + "#"
    doc = {
        "id": "c", "resolution": 0.25, "grid": rows,
        "rooms": [{"name": "r", "rect": [1, 1, 3, 14]}],
        "objects": [{"gid": "g1", "class": "mug", "name": "my mug",
                     "room": "r", "footprint": [[2, 13]],
                     "visual_tokens": ["mug"], "landmark": False,
                     "descriptions": []}],
        "goals": [{"type": "mug", "name": "my mug", "room": "r",
                   "target_gid": "g1"}],
        "start": {"x": 0.375, "y": 0.625, "heading": 0.0},
    }
    scn = load_scene(json.dumps(doc))
    l = shortest_path_length(scn, scn.start, scn.goals[0])
    gx, gy = 13.5 * 0.25, 2.5 * 0.25
    direct = math.hypot(gx - scn.start.x, gy - scn.start.y)
    assert 0 < l <= direct
