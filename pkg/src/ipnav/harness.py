"""Suite runner: scenes x seeds, goal chaining, persistence, reports.

Within one scene x seed run the goals execute in order; each goal starts
at the previous goal's final pose and the online occupancy, semantic map,
memory, and object registry persist. Memory can additionally be loaded
from a previous run's snapshot file to measure the second-run effect.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .memory import save_memory, load_memory  # noqa: F401 (re-export)
from .metrics import EpisodeResult, MetricsReport, compute_metrics, \
    shortest_path_length
from .orchestrator import EpisodeConfig, SceneRun, run_episode
from .policy import RemotePolicy, ScriptedPolicy
from .scene import Scene, load_scene
from .user_sim import REGIMES, TemplateUser


class SuiteError(RuntimeError):
    pass


@dataclass
class SuiteConfig:
    scenes: list[Scene] = field(default_factory=list)
    policy: str = "scripted"          # scripted | remote
    remote_endpoint: str | None = None
    feedback: str = "mixed"
    seeds: int = 5
    preset: str = "orion"
    ablate: frozenset = frozenset()
    memory_in: str | None = None      # path to a memory snapshot file
    memory_out: str | None = None
    transcripts_dir: str | None = None
    i_max: int = 5
    round_step_cap: int = 200

    def episode_config(self) -> EpisodeConfig:
        return EpisodeConfig.from_preset(
            self.preset, ablate=self.ablate, feedback=self.feedback,
            i_max=self.i_max, round_step_cap=self.round_step_cap,
            round_action_cap=self.round_step_cap)

    def echo(self) -> dict:
        return {
            "policy": self.policy,
            "feedback": self.feedback,
            "seeds": self.seeds,
            "preset": self.preset,
            "ablate": sorted(self.ablate),
            "i_max": self.i_max,
            "round_step_cap": self.round_step_cap,
            "scenes": [s.id for s in self.scenes],
            "memory_in": self.memory_in,
        }


def _make_policy(cfg: SuiteConfig):
    if cfg.policy == "scripted":
        return ScriptedPolicy()
    if cfg.policy == "remote":
        if not cfg.remote_endpoint:
            raise SuiteError("remote policy requires an endpoint")
        return RemotePolicy(cfg.remote_endpoint)
    raise SuiteError(f"unknown policy: {cfg.policy}")


def _load_memory_file(path: str) -> dict:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if "scenes" not in doc:
        raise SuiteError("memory file missing 'scenes'")
    return doc["scenes"]


def run_suite(cfg: SuiteConfig) -> MetricsReport:
    """Run every scene x seed x goal episode and aggregate metrics."""
    if cfg.feedback not in REGIMES:
        raise SuiteError(f"unknown feedback regime: {cfg.feedback}")
    if not cfg.scenes:
        raise SuiteError("no scenes configured")
    mem_in = _load_memory_file(cfg.memory_in) if cfg.memory_in else {}
    mem_out: dict = {}
    results: list[EpisodeResult] = []
    tdir = Path(cfg.transcripts_dir) if cfg.transcripts_dir else None
    if tdir:
        tdir.mkdir(parents=True, exist_ok=True)

    for scene in cfg.scenes:
        for seed in range(cfg.seeds):
            snapshot = mem_in.get(_mem_key(scene.id, seed))
            run = SceneRun(scene, cfg.episode_config(), seed=seed,
                           memory_snapshot=snapshot)
            user = TemplateUser(cfg.feedback, scene, seed=seed)
            policy = _make_policy(cfg)
            for gi, goal in enumerate(scene.goals):
                start_pose = run.agent.pose
                runner = run_episode(run, goal, policy, user)
                ref = None
                if tdir:
                    ref = f"{scene.id}_s{seed}_g{gi}.jsonl"
                    _write_transcript(tdir / ref, runner.transcript)
                results.append(EpisodeResult(
                    goal_name=goal.name,
                    success=int(runner.status == "Success"),
                    actual_path=runner.traveled,
                    shortest_path=shortest_path_length(scene, start_pose, goal),
                    interactions=max(1, runner.talk_count),
                    seed=seed,
                    scene_id=scene.id,
                    transcript_ref=ref,
                ))
            if cfg.memory_out:
                mem_out[_mem_key(scene.id, seed)] = save_memory(
                    run.memory, scene.resolution)

    if cfg.memory_out:
        with open(cfg.memory_out, "w", encoding="utf-8") as f:
            json.dump({"scenes": mem_out}, f)
    return compute_metrics(results, config=cfg.echo())


def _mem_key(scene_id: str, seed: int) -> str:
    return f"{scene_id}:{seed}"


def _write_transcript(path: Path, transcript: list[dict]):
    with open(path, "w", encoding="utf-8") as f:
        for rec in transcript:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def report_to_json(report: MetricsReport) -> str:
    doc = {
        "aggregate": {"N": report.n, "SR": report.sr, "SPL": report.spl,
                      "SIT": report.sit},
        "episodes": [{
            "goal": r.goal_name,
            "S": r.success,
            "a": r.actual_path,
            "l": r.shortest_path,
            "I": r.interactions,
            "seed": r.seed,
            "scene": r.scene_id,
            "transcript": r.transcript_ref,
        } for r in report.episodes],
        "config": report.config,
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def load_scene_dir(path: str) -> list[Scene]:
    files = sorted(Path(path).glob("*.json"))
    if not files:
        raise SuiteError(f"no scene files in {path}")
    return [load_scene(p.read_text(encoding="utf-8")) for p in files]
