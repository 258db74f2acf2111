"""Think-act-ask decision loop: a policy emits JSON thought/action pairs,
the dispatcher routes actions to modules and feeds the textual function
return back as context, and every talk hands control to the user channel
for adjudication. Episodes terminate on a confirmed goal or after the
interaction budget is spent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import control, exploration, grid, memory as memory_mod, perception, \
    semantic_map as smap_mod, user_sim
from .agent import AgentBody
from .embedding import _fnv1a64, SyntheticProvider
from .scene import GoalSpec, Scene
from .user_sim import Adjudication, FeedbackEvent, TemplateUser, adjudicate

RUNNING = "Running"
SUCCESS = "Success"
FAILED = "Failed"

DEFAULT_I_MAX = 5
DEFAULT_ROUND_CAP = 200

MODULE_LABELS = {"mem": "memory", "map": "semantic map", "det": "detection",
                 "exp": "exploration"}
ACTION_MODULE = {"retrieve_memory": "mem", "update_memory": "mem",
                 "retrieve_map": "map",
                 "detect_object": "det", "double_check": "det",
                 "search_object": "exp"}

PRESETS = {
    "orion": frozenset({"mem", "map", "det", "exp"}),
    "cow": frozenset({"det", "exp"}),
    "vlmap": frozenset({"map"}),
    "cf": frozenset({"map"}),
}


# --- LLM action protocol -----------------------------------------------------

class ActionParseError(ValueError):
    pass


class NoJsonError(ActionParseError):
    pass


class BadShapeError(ActionParseError):
    pass


class UnknownActionError(ActionParseError):
    pass


class BadArgsError(ActionParseError):
    pass


@dataclass(frozen=True)
class ActionCall:
    name: str
    args: dict


@dataclass(frozen=True)
class ThoughtAction:
    thought: str
    action: ActionCall


# arg name -> (type, required)
ACTION_SCHEMA: dict[str, dict[str, tuple[type, bool]]] = {
    "retrieve_memory": {"obj_str": (str, True)},
    "retrieve_map": {"obj_str": (str, True)},
    "detect_object": {"obj_str": (str, True)},
    "double_check": {"obj_id": (str, True)},
    "search_object": {"obj_str": (str, True)},
    "goto_point": {"point": (list, True)},
    "goto_object": {"obj_id": (str, True)},
    "update_memory": {"obj_id": (str, True), "pos_str": (str, False),
                      "neg_str": (str, False)},
    "move": {"num": (int, True)},
    "rotate": {"num": (int, True)},
    "talk": {"content": (str, True)},
}

MAX_MOVE_MULTIPLIER = 40


def validate_action(name: str, args: dict) -> ActionCall:
    if name not in ACTION_SCHEMA:
        raise UnknownActionError(f"unknown action name: {name}")
    schema = ACTION_SCHEMA[name]
    unknown = set(args) - set(schema)
    if unknown:
        raise BadArgsError(f"{name}: unknown args {sorted(unknown)}")
    for arg, (typ, required) in schema.items():
        if arg not in args or args[arg] is None:
            if required:
                raise BadArgsError(f"{name}: missing arg {arg}")
            continue
        val = args[arg]
        if typ is int and isinstance(val, bool):
            raise BadArgsError(f"{name}: {arg} must be an integer")
        if typ is int and isinstance(val, float) and val.is_integer():
            val = int(val)
            args = dict(args, **{arg: val})
        if not isinstance(val, typ):
            raise BadArgsError(f"{name}: {arg} must be {typ.__name__}")
    if name in ("move", "rotate"):
        num = args["num"]
        if abs(num) > MAX_MOVE_MULTIPLIER:
            raise BadArgsError(f"{name}: |num| must be <= {MAX_MOVE_MULTIPLIER}")
        if name == "move" and num < 1:
            raise BadArgsError("move: num must be >= 1")
    if name == "goto_point":
        pt = args["point"]
        if len(pt) != 2 or not all(isinstance(v, (int, float)) for v in pt):
            raise BadArgsError("goto_point: point must be [x, y]")
    if name == "update_memory" and args.get("pos_str") is None \
            and args.get("neg_str") is None:
        raise BadArgsError("update_memory: need pos_str or neg_str")
    return ActionCall(name, dict(args))


def parse_thought_action(text: str) -> ThoughtAction:
    """Extract the first balanced JSON object from `text` and validate it.

    Surrounding prose is tolerated. Raises a distinct ActionParseError
    subclass per failure mode so a retry loop can report what went wrong.
    """
    decoder = json.JSONDecoder()
    obj = None
    i = text.find("{")
    while i != -1:
        try:
            candidate, _ = decoder.raw_decode(text[i:])
        except json.JSONDecodeError:
            i = text.find("{", i + 1)
            continue
        if isinstance(candidate, dict):
            obj = candidate
            break
        i = text.find("{", i + 1)
    if obj is None:
        raise NoJsonError("no JSON object found in reply")
    if set(obj.keys()) != {"Thought", "Action"}:
        raise BadShapeError('reply object must have exactly "Thought" and "Action"')
    action = obj["Action"]
    if not isinstance(action, dict) or set(action.keys()) - {"name", "args"}:
        raise BadShapeError('"Action" must be {"name": ..., "args": {...}}')
    name = action.get("name")
    args = action.get("args", {})
    if not isinstance(name, str) or not isinstance(args, dict):
        raise BadShapeError('"Action" must carry a string name and an args object')
    return ThoughtAction(str(obj["Thought"]), validate_action(name, args))


# --- episode configuration ----------------------------------------------------

@dataclass(frozen=True)
class EpisodeConfig:
    feedback: str = "mixed"
    i_max: int = DEFAULT_I_MAX
    round_step_cap: int = DEFAULT_ROUND_CAP
    round_action_cap: int = DEFAULT_ROUND_CAP
    modules: frozenset = frozenset({"mem", "map", "det", "exp"})
    det_degraded: bool = False
    map_threshold: float = smap_mod.MAP_THRESHOLD
    det_threshold: float = perception.DET_THRESHOLD
    det_sigma: float = perception.DET_SIGMA
    embed_dim: int = 64
    success_radius: float = 1.5

    @classmethod
    def from_preset(cls, preset: str = "orion", ablate: frozenset = frozenset(),
                    **kw) -> "EpisodeConfig":
        if preset not in PRESETS:
            raise ValueError(f"unknown preset: {preset}")
        modules = PRESETS[preset] - (frozenset(ablate) - {"det"})
        cfg = cls(modules=modules, det_degraded="det" in ablate, **kw)
        if preset == "cf":
            cfg = replace(cfg, map_threshold=cfg.map_threshold - 0.05)
        return cfg

    def detector(self) -> perception.DetectorConfig:
        base = perception.DetectorConfig(self.det_threshold, self.det_sigma)
        return base.degraded() if self.det_degraded else base


class SceneRun:
    """State that persists across the goals of one scene x seed run:
    online occupancy, semantic map, memory, registry, the rng stream."""

    def __init__(self, scene: Scene, config: EpisodeConfig, seed: int,
                 provider=None, memory_snapshot: dict | None = None):
        self.scene = scene
        self.config = config
        self.seed = seed
        self.provider = provider if provider is not None \
            else SyntheticProvider(config.embed_dim)
        self.rng = np.random.default_rng(derive_seed(seed, scene.id))
        self.agent = AgentBody(scene, round_step_cap=config.round_step_cap)
        self.registry = perception.ObjectRegistry()
        self.explorer = exploration.Explorer()
        self.smap = smap_mod.build_semantic_map(scene, self.provider) \
            if "map" in config.modules else None
        dim = self.provider.dimension
        if memory_snapshot is not None:
            self.memory = memory_mod.load_memory(memory_snapshot, scene.rows,
                                                 scene.cols, dim)
        else:
            self.memory = memory_mod.MemoryMaps.zeros(scene.rows, scene.cols, dim)
        self.did_spin = False


def derive_seed(seed: int, *parts) -> int:
    return _fnv1a64(":".join([str(seed), *map(str, parts)]).encode())


# --- function-return formatting ------------------------------------------------

def _fmt_tuple(oid: str, dist: float, angle: float, score: float | None = None) -> str:
    base = f"({oid}, {dist:.1f}m, {int(round(angle))}°"
    if score is not None:
        base += f", {score:.2f}"
    return base + ")"


def format_candidates(kind: str, items) -> str:
    if kind == "memory":
        listing = ", ".join(_fmt_tuple(c.obj_id, c.distance, c.angle) for c in items)
        return f"Found {len(items)} items in memory: [{listing}]"
    if kind == "map":
        listing = ", ".join(_fmt_tuple(c.obj_id, c.distance, c.angle) for c in items)
        return f"Found {len(items)} items in map: [{listing}]"
    listing = ", ".join(_fmt_tuple(d.obj_id, d.distance, d.angle, d.score)
                        for d in items)
    return f"Found {len(items)} objects: [{listing}]"


# --- the episode runner ---------------------------------------------------------

@dataclass
class TalkOutcome:
    content: str
    adjudication: Adjudication
    talk_index: int


class PolicyBackendError(RuntimeError):
    pass


class EpisodeRunner:
    """Drives one goal episode; steppable so a service can pause at talks."""

    def __init__(self, run: SceneRun, goal: GoalSpec, policy):
        self.run = run
        self.goal = goal
        self.policy = policy
        self.config = run.config
        self.status = RUNNING
        self.fail_reason: str | None = None
        self.talk_count = 0
        self.transcript: list[dict] = []
        self.step_idx = 0
        self.actions_this_round = 0
        self.denied_ids: set[str] = set()
        self.confirm_target: str | None = None
        self.last_action: str | None = None
        self.last_data = None
        self.pending: TalkOutcome | None = None
        self.start_traveled = run.agent.traveled
        self._start_pose = run.agent.pose
        run.agent.reset_round()
        self._record("dialogue", role="user", text=f"Find {goal.name}.")
        if hasattr(policy, "begin_goal"):
            policy.begin_goal(self)

    # -- transcript ------------------------------------------------------

    def _record(self, kind: str, **fields):
        rec = {"step": self.step_idx, "kind": kind}
        rec.update(fields)
        self.transcript.append(rec)
        self.step_idx += 1

    @property
    def traveled(self) -> float:
        return self.run.agent.traveled - self.start_traveled

    # -- main loop ---------------------------------------------------------

    def advance(self) -> str:
        """Run until the next talk or terminal state.

        Returns "awaiting_user" with self.pending set, or "done"."""
        if self.status != RUNNING:
            return "done"
        agent = self.run.agent
        if not self.run.did_spin:
            exploration.initial_spin(agent)
            self.run.did_spin = True
        while self.status == RUNNING:
            forced = self.actions_this_round >= self.config.round_action_cap \
                or not agent.budget_left()
            if forced:
                ta = ThoughtAction(
                    "The step budget for this round is spent; I should check "
                    "with the user.",
                    ActionCall("talk", {"content":
                               f"I have been searching for a while. "
                               f"Is this {self.goal.name}?"}))
            else:
                try:
                    ta = self.policy.step(self)
                except PolicyBackendError as e:
                    self.status = FAILED
                    self.fail_reason = f"policy backend failure: {e}"
                    return "done"
            self._record("thought_action", thought=ta.thought,
                         action={"name": ta.action.name, "args": ta.action.args})
            if ta.action.name == "talk":
                return self._on_talk(ta.action.args["content"])
            ret = self.dispatch(ta.action)
            self.actions_this_round += 1
            self._record("function_return", text=ret)
        return "done"

    def _on_talk(self, content: str) -> str:
        self.talk_count += 1
        self._record("dialogue", role="robot", text=content)
        agent = self.run.agent
        adj = adjudicate(agent.pose, self.goal, self.run.scene, agent)
        self.pending = TalkOutcome(content, adj, self.talk_count)
        agent.reset_round()
        self.actions_this_round = 0
        return "awaiting_user"

    def resolve_talk(self, utterance: str | None, event: FeedbackEvent | None) -> str:
        """Settle the pending talk: success/failure bookkeeping plus the
        user's reply (if any) delivered to the policy."""
        if self.pending is None:
            raise RuntimeError("no talk pending")
        adj = self.pending.adjudication
        if adj.success:
            v = user_sim._variant(self.run.seed, self.pending.talk_index,
                                  "success", len(user_sim._SUCCESS))
            self._record("dialogue", role="user",
                         text=user_sim._SUCCESS[v].format(name=self.goal.name))
            self._commit_confirmation()
            self.status = SUCCESS
            self.pending = None
            return "done"
        proximity_hint = (event is not None and event.kind == "procedural"
                          and not event.payload.get("steps"))
        if self.confirm_target is not None and not proximity_hint:
            # the user rejected this object's identity
            self.denied_ids.add(self.confirm_target)
        self.confirm_target = None
        if self.config.feedback == "none" or self.talk_count >= self.config.i_max:
            self.status = FAILED
            self.fail_reason = "no interaction allowed" \
                if self.config.feedback == "none" else "interaction budget spent"
            self.pending = None
            return "done"
        if utterance:
            self._record("dialogue", role="user", text=utterance)
        if hasattr(self.policy, "on_feedback"):
            self.policy.on_feedback(self, utterance, event)
        self.pending = None
        return "running"

    def _commit_confirmation(self):
        """A confirmed goal is recorded under its personalized name so a
        later run (or a later goal) can retrieve it from memory directly.

        The user's "yes" refers to the object they saw the robot reach, so
        the write anchors to the adjudicated object: a stale claim (forced
        talk) falls back to the registry entry for the reached object, and
        a claim that contradicts the adjudication is skipped."""
        if "mem" not in self.config.modules:
            return
        reached = self.pending.adjudication.reached_gid
        target = self.confirm_target
        if target is not None and target not in self.run.registry:
            target = None
        if target is not None:
            hint = self.run.registry.get(target).gid_hint
            if hint is not None and reached is not None and hint != reached:
                target = None
        if target is None and reached is not None:
            for oid in self.run.registry.ids():
                if self.run.registry.get(oid).gid_hint == reached:
                    target = oid
                    break
        if target is None and reached is not None:
            # confirmed but never registered: segment the visible surface
            # of the reached object now, as a detection would
            obj = self.run.scene.object_by_gid(reached)
            region = perception._visible_footprint_cells(
                self.run.agent.fan(), obj)
            if region:
                target = self.run.registry.register(region, "detection",
                                                    gid_hint=reached)
        if target is None:
            return
        ta = ThoughtAction(
            f"The user confirmed it. I will remember this object as "
            f"{self.goal.name}.",
            ActionCall("update_memory", {"obj_id": target,
                                         "pos_str": self.goal.name,
                                         "neg_str": None}))
        self._record("thought_action", thought=ta.thought,
                     action={"name": ta.action.name, "args": ta.action.args})
        ret = self.dispatch(ta.action)
        self._record("function_return", text=ret)

    # -- dispatch ------------------------------------------------------------

    def _module_on(self, action_name: str) -> bool:
        mod = ACTION_MODULE.get(action_name)
        return mod is None or mod in self.config.modules

    def dispatch(self, call: ActionCall) -> str:
        """Route one non-talk action; errors become return strings."""
        self.last_action = call.name
        self.last_data = None
        if call.name not in ("goto_object", "double_check"):
            # only an explicit approach counts as claiming an object; any
            # other action invalidates the claim a talk would refer to
            self.confirm_target = None
        if not self._module_on(call.name):
            label = MODULE_LABELS[ACTION_MODULE[call.name]]
            return f"The {label} module is unavailable."
        try:
            return self._dispatch_inner(call)
        except (perception.PerceptionError, memory_mod.MemoryStoreError,
                smap_mod.SemanticMapError, control.ControlError,
                ValueError) as e:
            return f"Error: {e}"

    def _dispatch_inner(self, call: ActionCall) -> str:
        run = self.run
        agent = run.agent
        args = call.args
        name = call.name

        if name == "retrieve_memory":
            cands = memory_mod.retrieve_memory(
                args["obj_str"], agent.pose, run.memory, run.registry,
                run.provider, agent.resolution)
            self.last_data = cands
            return format_candidates("memory", cands)

        if name == "retrieve_map":
            cands = smap_mod.retrieve_map(
                args["obj_str"], agent.pose, run.smap, run.registry,
                run.provider, scene=run.scene,
                threshold=self.config.map_threshold)
            self.last_data = cands
            return format_candidates("map", cands)

        if name == "detect_object":
            dets = perception.detect_object(args["obj_str"], agent, run.registry,
                                            run.provider, run.rng,
                                            self.config.detector())
            self.last_data = dets
            return format_candidates("det", dets)

        if name == "double_check":
            self.confirm_target = args["obj_id"]
            det = perception.double_check(args["obj_id"], agent, run.registry,
                                          run.provider, run.rng,
                                          self.config.detector())
            self.last_data = det
            if det is None:
                return (f"Re-checked {args['obj_id']}: no longer detected "
                        f"(score below threshold).")
            return f"Re-checked {args['obj_id']}: " + _fmt_tuple(
                det.obj_id, det.distance, det.angle, det.score)

        if name == "search_object":
            out = run.explorer.search_object(
                args["obj_str"], agent, run.registry, run.provider, run.rng,
                self.config.detector(), exclude_ids=frozenset(self.denied_ids))
            self.last_data = out
            if out == exploration.EXHAUSTED:
                return "Exploration exhausted: no frontiers remain."
            if out == exploration.BUDGET:
                return "Exploration paused: step budget for this round is spent."
            return format_candidates("det", out)

        if name == "goto_point":
            x, y = float(args["point"][0]), float(args["point"][1])
            nav = control.goto_point(agent, (x, y))
            self.last_data = nav
            if nav.blocked:
                return f"Blocked on the way to ({x:.2f}, {y:.2f})."
            return f"Reached ({x:.2f}, {y:.2f})."

        if name == "goto_object":
            oid = args["obj_id"]
            run.registry.get(oid)  # raises on unknown id
            nav = control.goto_object(agent, oid, run.registry,
                                      self.config.success_radius)
            self.last_data = nav
            if nav.blocked:
                return f"Cannot reach {oid}."
            self.confirm_target = oid
            cx, cy = run.registry.region_centroid(oid, agent.resolution)
            d = math.hypot(cx - agent.pose.x, cy - agent.pose.y)
            rel = grid.wrap_angle(
                grid.bearing_to(agent.pose.x, agent.pose.y, cx, cy)
                - agent.pose.heading)
            return f"Arrived at {oid} ({d:.1f}m, {int(round(rel))}°)."

        if name == "update_memory":
            memory_mod.update_memory(args["obj_id"], args.get("pos_str"),
                                     args.get("neg_str"), run.registry,
                                     run.memory, run.provider)
            return f"Memory updated for {args['obj_id']}."

        if name == "move":
            num = args["num"]
            done = 0
            blocked = False
            for _ in range(num):
                if not agent.budget_left():
                    break
                if agent.forward():
                    blocked = True
                    break
                done += 1
            msg = f"Moved {done} steps ({done * control.STEP_M:.2f}m)."
            if blocked:
                msg += " Blocked by an obstacle."
            return msg

        if name == "rotate":
            num = args["num"]
            for i in range(abs(num)):
                if not agent.budget_left():
                    break
                agent.turn(-1 if num > 0 else 1, sense=(i == abs(num) - 1))
            agent.sense()
            side = "right" if num > 0 else "left"
            return (f"Rotated {abs(num) * int(control.TURN_DEG)}° {side}. "
                    f"Now facing {int(round(agent.pose.heading))}°.")

        raise ValueError(f"unroutable action: {name}")


def run_episode(run: SceneRun, goal: GoalSpec, policy,
                user: TemplateUser) -> EpisodeRunner:
    """Headless episode loop with a simulated user."""
    runner = EpisodeRunner(run, goal, policy)
    while True:
        state = runner.advance()
        if state == "done":
            return runner
        adj = runner.pending.adjudication
        if adj.success or runner.config.feedback == "none" \
                or runner.talk_count >= runner.config.i_max:
            runner.resolve_talk(None, None)
            if runner.status != RUNNING:
                return runner
            continue
        utter, event, _ = user.respond(goal, run.agent, adj, runner.talk_count)
        runner.resolve_talk(utter, event)
