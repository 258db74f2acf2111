"""HTTP service for live episodes: session lifecycle, stepping until the
agent talks, human feedback injection, and renderable state snapshots.

Adjudication always runs server-side against ground truth; a human user
supplies feedback content only. Snapshots never reveal ground-truth object
identities unless the reveal flag is set for post-episode review.
"""

from __future__ import annotations

import itertools
import json
import threading
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from . import grid
from .orchestrator import EpisodeConfig, EpisodeRunner, SceneRun
from .policy import ScriptedPolicy
from .scene import Scene, load_scene
from .user_sim import TemplateUser, parse_feedback_text

AWAITING_USER = "AwaitingUser"
AGENT_RUNNING = "AgentRunning"
TERMINAL = "Terminal"


class Session:
    def __init__(self, sid: str, scene: Scene, goal_index: int, policy: str,
                 mode: str, config: EpisodeConfig, seed: int):
        self.sid = sid
        self.scene = scene
        self.goal_index = goal_index
        self.mode = mode
        self.lock = threading.Lock()
        self.run = SceneRun(scene, config, seed=seed)
        if policy == "remote":
            raise ValueError("remote policy sessions need an endpoint config")
        self.policy = ScriptedPolicy()
        self.goal = scene.goals[goal_index]
        self.runner = EpisodeRunner(self.run, self.goal, self.policy)
        self.user = TemplateUser(config.feedback, scene, seed=seed) \
            if mode == "simulated-user" else None
        self.pending = AGENT_RUNNING
        self.events_cursor = 0

    def state_name(self) -> str:
        return self.pending

    def step(self) -> dict:
        outcome = self.runner.advance()
        if outcome == "awaiting_user":
            adj = self.runner.pending.adjudication
            if adj.success or self.runner.config.feedback == "none" \
                    or self.runner.talk_count >= self.runner.config.i_max:
                self.runner.resolve_talk(None, None)
                self.pending = TERMINAL
            elif self.user is not None:
                # simulated-user sessions answer their own talks
                utter, event, _ = self.user.respond(self.goal, self.run.agent,
                                                    adj, self.runner.talk_count)
                self.runner.resolve_talk(utter, event)
                self.pending = AGENT_RUNNING
            else:
                self.pending = AWAITING_USER
        else:
            self.pending = TERMINAL
        new = self.runner.transcript[self.events_cursor:]
        self.events_cursor = len(self.runner.transcript)
        talk = None
        for rec in reversed(new):
            if rec["kind"] == "dialogue" and rec["role"] == "robot":
                talk = rec["text"]
                break
        return {"status": self.pending, "events": new, "talk": talk}

    def post_message(self, text: str) -> dict:
        # ground truth already adjudicated at talk time; the human text is
        # feedback content only, so the parsed success flag is ignored
        _, event = parse_feedback_text(text)
        state = self.runner.resolve_talk(text, event)
        self.pending = TERMINAL if state == "done" else AGENT_RUNNING
        return {"status": self.pending,
                "adjudication": {"success": self.runner.status == "Success"}}

    def snapshot(self, reveal: bool = False) -> dict:
        agent = self.run.agent
        online = agent.online
        flat = online.flatten()
        rle = []
        for val, group in itertools.groupby(flat.tolist()):
            rle.append([int(val), sum(1 for _ in group)])
        known_free = int((online == grid.FREE).sum())
        known_occ = int((online == grid.OCCUPIED).sum())
        markers = []
        for oid in self.run.registry.ids():
            cx, cy = self.run.registry.region_centroid(oid, agent.resolution)
            markers.append({"obj_id": oid, "x": cx, "y": cy})
        dialogue = [{"role": r["role"], "text": r["text"]}
                    for r in self.runner.transcript if r["kind"] == "dialogue"]
        doc = {
            "session_id": self.sid,
            "status": self.pending,
            "rows": self.scene.rows,
            "cols": self.scene.cols,
            "resolution": self.scene.resolution,
            "occupancy_rle": rle,
            "known_free": known_free,
            "known_occupied": known_occ,
            "pose": {"x": agent.pose.x, "y": agent.pose.y,
                     "heading": agent.pose.heading},
            "trajectory": [[x, y] for x, y in agent.trajectory],
            "objects": markers,
            "dialogue": dialogue,
            "goal_name": self.goal.name,
            "metrics": {
                "S": int(self.runner.status == "Success"),
                "a": self.runner.traveled,
                "I": self.runner.talk_count,
                "status": self.runner.status,
            },
        }
        if reveal:
            obj = self.scene.goal_object(self.goal)
            doc["reveal"] = {
                "target_gid": obj.gid,
                "footprint": sorted(list(obj.footprint)),
                "room": obj.room,
            }
        return doc


def create_app(scene_dir: str) -> FastAPI:
    app = FastAPI(title="ipnav service")
    scenes: dict[str, Scene] = {}
    for p in sorted(Path(scene_dir).glob("*.json")):
        scn = load_scene(p.read_text(encoding="utf-8"))
        scenes[scn.id] = scn
    sessions: dict[str, Session] = {}
    counter = itertools.count(1)
    store_lock = threading.Lock()

    def error(status: int, msg: str) -> JSONResponse:
        return JSONResponse({"error": msg}, status_code=status)

    @app.get("/scenes")
    def list_scenes():
        return {"scenes": [{
            "id": s.id,
            "goals": [{"index": i, "name": g.name} for i, g in enumerate(s.goals)],
        } for s in scenes.values()]}

    @app.post("/sessions")
    def create_session(body: dict):
        scene_id = body.get("scene_id")
        if scene_id not in scenes:
            return error(404, f"unknown scene: {scene_id}")
        goal_index = int(body.get("goal_index", 0))
        scn = scenes[scene_id]
        if not 0 <= goal_index < len(scn.goals):
            return error(400, f"goal_index out of range: {goal_index}")
        mode = body.get("mode", "human-user")
        if mode not in ("human-user", "simulated-user"):
            return error(400, f"unknown mode: {mode}")
        feedback = body.get("feedback", "mixed")
        try:
            config = EpisodeConfig.from_preset(
                body.get("preset", "orion"), feedback=feedback)
        except ValueError as e:
            return error(400, str(e))
        sid = f"sess_{next(counter)}"
        try:
            session = Session(sid, scn, goal_index, body.get("policy", "scripted"),
                              mode, config, seed=int(body.get("seed", 0)))
        except ValueError as e:
            return error(400, str(e))
        with store_lock:
            sessions[sid] = session
        return {"session_id": sid, "status": session.state_name(),
                "goal_name": scn.goals[goal_index].name}

    @app.post("/sessions/{sid}/step")
    def step(sid: str):
        session = sessions.get(sid)
        if session is None:
            return error(404, f"unknown session: {sid}")
        with session.lock:
            if session.pending != AGENT_RUNNING:
                return error(409, f"session is {session.pending}")
            return session.step()

    @app.post("/sessions/{sid}/message")
    def post_message(sid: str, body: dict):
        session = sessions.get(sid)
        if session is None:
            return error(404, f"unknown session: {sid}")
        with session.lock:
            if session.mode != "human-user":
                return error(409, "session is not in human-user mode")
            if session.pending != AWAITING_USER:
                return error(409, f"session is {session.pending}")
            text = body.get("text", "")
            if not isinstance(text, str) or not text.strip():
                return error(400, "text required")
            return session.post_message(text)

    @app.get("/sessions/{sid}/state")
    def get_state(sid: str, reveal: bool = False):
        session = sessions.get(sid)
        if session is None:
            return error(404, f"unknown session: {sid}")
        with session.lock:
            allow_reveal = reveal and session.pending == TERMINAL
            return session.snapshot(reveal=allow_reveal)

    return app


def dump_snapshot(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True)
