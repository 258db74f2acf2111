"""Acceptance suite: every exit criterion as a test, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s`. The benchmark runs are
shared across criteria through module-scoped fixtures, so the whole module
costs a handful of suite runs rather than one per criterion.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import bellman_ford_costs

from ipnav import grid
from ipnav.agent import AgentBody
from ipnav.control import plan_distance_field
from ipnav.embedding import SyntheticProvider
from ipnav.exploration import EXHAUSTED, Explorer, initial_spin
from ipnav.harness import SuiteConfig, run_suite, report_to_json
from ipnav.memory import retrieve_memory
from ipnav.metrics import EpisodeResult, compute_metrics
from ipnav.orchestrator import EpisodeConfig, SceneRun, run_episode
from ipnav.perception import DetectorConfig, ObjectRegistry
from ipnav.policy import ScriptedPolicy
from ipnav.scenegen import GenParams, benchmark_scenes, generate_scene
from ipnav.user_sim import TemplateUser

_PROVIDER = SyntheticProvider()

FAST = bool(os.environ.get("IPNAV_ACCEPT_FAST"))
N_SCENES = 4 if FAST else 10
N_SEEDS = 2 if FAST else 5
REGIMES = ("none", "yesno", "corrective", "descriptive", "landmark",
           "procedural", "mixed")


def verdict(name: str, ok: bool, detail: str = ""):
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print("\n" + line)
    assert ok, line


@pytest.fixture(scope="module")
def scenes():
    return benchmark_scenes(N_SCENES)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="module")
def regime_reports(scenes, workdir):
    """One suite run per feedback regime; mixed also snapshots memory."""
    reports = {}
    durations = {}
    for regime in REGIMES:
        cfg = SuiteConfig(scenes=scenes, seeds=N_SEEDS, feedback=regime)
        if regime == "mixed":
            cfg.memory_out = str(workdir / "memory_first_run.json")
            cfg.transcripts_dir = str(workdir / "transcripts_a")
        t0 = time.perf_counter()
        reports[regime] = run_suite(cfg)
        durations[regime] = time.perf_counter() - t0
    return reports, durations


@pytest.fixture(scope="module")
def ablation_reports(scenes):
    out = {}
    for ab in ("mem", "exp", "det", "map"):
        cfg = SuiteConfig(scenes=scenes, seeds=N_SEEDS, feedback="mixed",
                          ablate=frozenset({ab}))
        out[ab] = run_suite(cfg)
    return out


def test_metric_formula_identities():
    results = [EpisodeResult("a", 1, 5.0, 4.0, 1),
               EpisodeResult("b", 0, 2.0, 2.0, 3),
               EpisodeResult("c", 1, 10.0, 5.0, 5)]
    m = compute_metrics(results)
    exact = (abs(m.sr - 66.66666666666667) < 1e-6
             and abs(m.spl - 43.333333333333336) < 1e-6
             and abs(m.sit - 40.0) < 1e-6)
    rng = np.random.default_rng(123)
    bounded = True
    for _ in range(1000):
        n = int(rng.integers(1, 15))
        rs = [EpisodeResult("g", int(rng.integers(0, 2)),
                            float(rng.uniform(0, 40)),
                            float(rng.uniform(0, 25)),
                            int(rng.integers(1, 6))) for _ in range(n)]
        mm = compute_metrics(rs)
        if mm.spl > mm.sr + 1e-9 or mm.sit > mm.sr + 1e-9:
            bounded = False
            break
    verdict("metric-formula-identities", exact and bounded,
            f"SR={m.sr:.6f} SPL={m.spl:.6f} SIT={m.sit:.6f}, fuzz={bounded}")


def test_no_interaction_identity(regime_reports):
    reports, _ = regime_reports
    r = reports["none"]
    ok = r.sit == r.sr and all(e.interactions == 1 for e in r.episodes)
    verdict("no-interaction-identity", ok, f"SR={r.sr:.3f} SIT={r.sit:.3f}")


def test_feedback_monotonicity(regime_reports):
    reports, durations = regime_reports
    sr = {k: v.sr for k, v in reports.items()}
    singles = {k: sr[k] for k in
               ("corrective", "descriptive", "landmark", "procedural")}
    best_single = max(singles.values())
    top2 = sorted(singles.values(), reverse=True)[:2]
    ok = (sr["none"] < sr["yesno"] <= best_single <= sr["mixed"] + 1e-9
          and sr["procedural"] >= top2[-1])
    budget_ok = max(durations.values()) < 120.0
    detail = " ".join(f"{k}={v:.1f}" for k, v in sr.items())
    verdict("feedback-monotonicity", ok and budget_ok,
            detail + f" slowest_suite={max(durations.values()):.1f}s")


def test_ablation_direction(regime_reports, ablation_reports):
    reports, _ = regime_reports
    full = reports["mixed"].sr
    srs = {k: v.sr for k, v in ablation_reports.items()}
    ok = full >= srs["mem"] and srs["map"] == min(srs.values())
    verdict("ablation-direction", ok,
            f"full={full:.1f} " + " ".join(f"wo_{k}={v:.1f}"
                                           for k, v in srs.items()))


def test_memory_second_run(scenes, workdir, regime_reports):
    reports, _ = regime_reports
    first = reports["mixed"]
    cfg = SuiteConfig(scenes=scenes, seeds=N_SEEDS, feedback="mixed",
                      memory_in=str(workdir / "memory_first_run.json"))
    second = run_suite(cfg)
    d_sr = second.sr - first.sr
    d_sit = second.sit - first.sit
    ok = d_sr >= 10.0 and d_sit >= 10.0
    verdict("memory-second-run", ok,
            f"SR {first.sr:.1f}->{second.sr:.1f} ({d_sr:+.1f}), "
            f"SIT {first.sit:.1f}->{second.sit:.1f} ({d_sit:+.1f})")


def test_planner_optimality():
    rng = np.random.default_rng(2024)
    ok = True
    for trial in range(100):
        passable = rng.random((20, 20)) > 0.3
        sr_, sc_ = int(rng.integers(0, 20)), int(rng.integers(0, 20))
        passable[sr_, sc_] = True
        dist = plan_distance_field(passable, [(sr_, sc_)], 0.25)
        oracle = bellman_ford_costs(passable, [(sr_, sc_)], 0.25)
        if not np.allclose(dist, oracle, rtol=0, atol=1e-9, equal_nan=True):
            ok = False
            break
    verdict("planner-optimality", ok, f"grids={trial + 1}")


def test_exploration_coverage_and_termination():
    n = 20 if FAST else 50
    worst = 1.0
    ok = True
    for seed in range(n):
        scn = generate_scene(1000 + seed)
        agent = AgentBody(scn)
        agent.round_step_cap = 100_000
        initial_spin(agent)
        out = Explorer().search_object(
            "unobtainium", agent, ObjectRegistry(), _PROVIDER,
            np.random.default_rng(seed), DetectorConfig())
        if out != EXHAUSTED:
            ok = False
            break
        reachable = grid.reachable_mask(scn.occ, scn.start.cell(scn.resolution))
        known = agent.online != grid.UNKNOWN
        frac = (known & reachable).sum() / max(1, reachable.sum())
        worst = min(worst, frac)
        if frac < 0.95:
            ok = False
            break
    verdict("exploration-coverage", ok,
            f"scenes={n} worst_coverage={worst:.3f}")


def test_personalization_end_to_end():
    params = GenParams(lookalike_counts=(3,), hard_lookalikes=False,
                       n_hard=0, n_goals=6, n_objects=10)
    scn = generate_scene(77, params)
    by_class = {}
    for o in scn.objects:
        by_class.setdefault(o.class_label, []).append(o)
    lookalikes = next(v for v in by_class.values() if len(v) == 3)
    goal = next(g for g in scn.goals
                if g.target_gid in {o.gid for o in lookalikes})

    cfg = EpisodeConfig.from_preset("orion", feedback="corrective")
    run = SceneRun(scn, cfg, seed=0)
    user = TemplateUser("corrective", scn, seed=0)
    runner = run_episode(run, goal, ScriptedPolicy(), user)
    found = runner.status == "Success" and runner.talk_count <= 3
    cands = retrieve_memory(goal.name, run.agent.pose, run.memory,
                            run.registry, run.provider, scn.resolution)
    ok = found and len(cands) == 1
    verdict("personalization-pipeline", ok,
            f"goal={goal.name!r} status={runner.status} I={runner.talk_count} "
            f"memory_candidates={len(cands)}")


def test_determinism_byte_identical(scenes, workdir, regime_reports):
    # first mixed run already wrote transcripts_a via the shared fixture
    reports, _ = regime_reports
    report_a = report_to_json(reports["mixed"])
    cfg = SuiteConfig(scenes=scenes, seeds=N_SEEDS, feedback="mixed",
                      transcripts_dir=str(workdir / "transcripts_b"),
                      memory_out=str(workdir / "memory_b.json"))
    report_b = report_to_json(run_suite(cfg))
    same_report = report_a == report_b
    dir_a = Path(workdir / "transcripts_a")
    dir_b = Path(workdir / "transcripts_b")
    names_a = sorted(p.name for p in dir_a.glob("*.jsonl"))
    names_b = sorted(p.name for p in dir_b.glob("*.jsonl"))
    same_files = names_a == names_b and all(
        (dir_a / n).read_bytes() == (dir_b / n).read_bytes() for n in names_a)
    verdict("determinism", same_report and same_files,
            f"report_equal={same_report} transcripts={len(names_a)} "
            f"files_equal={same_files}")
