"""Decision policies.

ScriptedPolicy is a deterministic codification of the think-act-ask flow:
memory first, then map candidates nearest-first with double checks, user
feedback folded in (corrective names update memory, landmark and
procedural feedback relocate the search, descriptive feedback refines the
detection query), frontier exploration when retrieval runs dry, and a
give-up confirmation when everything is spent.

RemotePolicy forwards the rolling context to a chat endpoint and parses
its JSON replies, retrying on malformed output.
"""

from __future__ import annotations

import json

from .exploration import BUDGET, EXHAUSTED
from .orchestrator import (ActionCall, ActionParseError, EpisodeRunner,
                           PolicyBackendError, ThoughtAction,
                           parse_thought_action)
from .tokens import tokenize
from .user_sim import FeedbackEvent

SWEEP_SECTORS = 8  # 8 x 45 degrees = full look-around
MAX_QUERY_TOKENS = 4


class ScriptedPolicy:
    """Deterministic phase machine; consumes structured feedback events."""

    def __init__(self):
        self._reset()

    def _reset(self):
        self.plan: list[tuple[str, ThoughtAction]] = []
        self.queue: list[tuple[str, str]] = []  # (obj_id, source)
        self.queued: set[str] = set()
        self.denied: set[str] = set()
        self.current: tuple[str, str] | None = None
        self.awaiting: str | None = None
        self.confirm_ready = False
        self.mem_checked = False
        self.map_checked = False
        self.exhausted = False
        self.active_query = ""
        self.goal = None

    def begin_goal(self, ep: EpisodeRunner):
        self._reset()
        self.goal = ep.goal
        self.active_query = ep.goal.type

    # -- reacting to the previous function return ---------------------------

    def _fresh(self, items) -> list:
        out = []
        for it in items:
            if it.obj_id in self.denied or it.obj_id in self.queued:
                continue
            out.append(it)
        return out

    def _enqueue(self, items, source: str):
        for it in self._fresh(items):
            self.queue.append((it.obj_id, source))
            self.queued.add(it.obj_id)

    def _ingest(self, ep: EpisodeRunner):
        tag, data = self.awaiting, ep.last_data
        self.awaiting = None
        if tag is None:
            return
        if tag == "mem" and isinstance(data, list):
            self._enqueue(data, "memory")
        elif tag == "map" and isinstance(data, list):
            self._enqueue(data, "map")
        elif tag in ("detect", "search"):
            if isinstance(data, list):
                before = len(self.queue)
                self._enqueue(data, "detection")
                if len(self.queue) > before and self.plan:
                    self.plan.clear()  # a sweep found something; stop sweeping
            elif data == EXHAUSTED:
                self.exhausted = True
            elif data == BUDGET:
                pass  # forced talk will follow; search resumes afterwards
        elif tag == "goto":
            nav = data
            if nav is not None and nav.blocked and nav.budget_stopped \
                    and self.current:
                # out of round budget mid-approach: retry after the talk
                self.queue.insert(0, self.current)
                self.current = None
                self.confirm_ready = False
            elif nav is None or nav.blocked:
                self._skip_current()  # unreachable now; may retry if re-seen
            elif self.current and self.current[1] == "map" \
                    and "det" in ep.config.modules:
                oid = self.current[0]
                self.plan.append(("check", ThoughtAction(
                    f"I reached {oid}. I should double check it before asking.",
                    ActionCall("double_check", {"obj_id": oid}))))
            else:
                self.confirm_ready = True
        elif tag == "check":
            if data is None:
                self._drop_current()
            else:
                self.confirm_ready = True
        elif tag in ("landmark_map", "landmark_search"):
            target = None
            if isinstance(data, list):
                for it in data:
                    if it.obj_id not in self.denied:
                        target = it.obj_id
                        break
            elif data == EXHAUSTED:
                self.exhausted = True
            if target is not None:
                self.plan.append(("event_goto", ThoughtAction(
                    f"Walking over to {target} to look around it.",
                    ActionCall("goto_object", {"obj_id": target}))))
        elif tag == "event_goto":
            if data is None or getattr(data, "blocked", False):
                self.plan.clear()
            else:
                self._plan_sweep()

    def _drop_current(self):
        """The candidate is out for this goal (denied or failed a re-check)."""
        if self.current:
            self.denied.add(self.current[0])
        self.current = None
        self.confirm_ready = False

    def _skip_current(self):
        """Navigation failed; release the id so a later sighting can retry."""
        if self.current:
            self.queued.discard(self.current[0])
        self.current = None
        self.confirm_ready = False

    # -- choosing the next action --------------------------------------------

    def step(self, ep: EpisodeRunner) -> ThoughtAction:
        self._ingest(ep)
        if self.plan:
            tag, ta = self.plan.pop(0)
            self.awaiting = tag
            return ta
        goal = self.goal
        if self.confirm_ready and self.current:
            self.awaiting = "talk_confirm"
            self.confirm_ready = False
            return ThoughtAction(
                "This could be the goal. I will confirm with the user.",
                ActionCall("talk", {"content": f"Is this {goal.name}?"}))
        if not self.mem_checked and "mem" in ep.config.modules:
            self.mem_checked = True
            self.awaiting = "mem"
            return ThoughtAction(
                f"The user wants {goal.name}. I should first search my memory "
                f"to see if I found it before.",
                ActionCall("retrieve_memory", {"obj_str": goal.name}))
        if self.queue:
            self.current = self.queue.pop(0)
            self.confirm_ready = False
            self.awaiting = "goto"
            return ThoughtAction(
                f"I will move to {self.current[0]} and take a close look.",
                ActionCall("goto_object", {"obj_id": self.current[0]}))
        if not self.map_checked and "map" in ep.config.modules:
            self.map_checked = True
            self.awaiting = "map"
            return ThoughtAction(
                f"Nothing in memory. The map may know where a {goal.type} is.",
                ActionCall("retrieve_map", {"obj_str": goal.type}))
        if "exp" in ep.config.modules and not self.exhausted:
            self.awaiting = "search"
            return ThoughtAction(
                f"No candidates left. I will explore for a {self.active_query}.",
                ActionCall("search_object", {"obj_str": self.active_query}))
        self.awaiting = "talk_giveup"
        return ThoughtAction(
            "I cannot find it anywhere I can reach.",
            ActionCall("talk", {"content":
                                f"I cannot find {goal.name}. Can you help?"}))

    # -- user feedback -----------------------------------------------------------

    def on_feedback(self, ep: EpisodeRunner, utterance: str | None,
                    event: FeedbackEvent | None):
        was_confirm = self.awaiting == "talk_confirm"
        self.awaiting = None
        confirmed = self.current
        self.current = None
        self.confirm_ready = False
        if event is None:
            event = FeedbackEvent("yesno", {})
        kind = event.kind
        proximity = kind == "procedural" and not event.payload.get("steps")

        if was_confirm and confirmed and proximity:
            # right object, bad vantage: release it for a retry and look
            # around from here rather than recording a denial
            self.queued.discard(confirmed[0])
            if "det" in ep.config.modules:
                self._plan_sweep()
            return
        if was_confirm and confirmed:
            self.denied.add(confirmed[0])

        mem_on = "mem" in ep.config.modules
        if was_confirm and confirmed and mem_on:
            pos = event.payload.get("name") if kind == "corrective" else None
            self.plan.append(("update", ThoughtAction(
                "The user denied this object. I will record that "
                + ("and its actual name." if pos else "in memory."),
                ActionCall("update_memory", {
                    "obj_id": confirmed[0],
                    "pos_str": pos,
                    "neg_str": self.goal.name,
                }))))

        if kind == "landmark":
            cls = event.payload["class"]
            if "map" in ep.config.modules:
                self.plan.append(("landmark_map", ThoughtAction(
                    f"The goal is near the {cls}. I will find the {cls} first.",
                    ActionCall("retrieve_map", {"obj_str": cls}))))
            elif "exp" in ep.config.modules and "det" in ep.config.modules:
                self.plan.append(("landmark_search", ThoughtAction(
                    f"The goal is near the {cls}. I will explore for the {cls}.",
                    ActionCall("search_object", {"obj_str": cls}))))
        elif kind == "procedural":
            steps = event.payload.get("steps", [])
            for step in steps:
                if step[0] == "turn":
                    num = -int(round(step[1] / 15.0))  # positive num turns right
                    if num:
                        self.plan.append(("event_move", ThoughtAction(
                            "Following the user's route.",
                            ActionCall("rotate", {"num": num}))))
                else:
                    num = max(1, int(round(step[1] / 0.25)))
                    self.plan.append(("event_move", ThoughtAction(
                        "Following the user's route.",
                        ActionCall("move", {"num": num}))))
            # empty steps mean the goal is already at hand: look around here
            if "det" in ep.config.modules:
                self._plan_sweep()
        elif kind == "descriptive":
            extra = [t for t in tokenize(event.payload.get("sentence", ""))
                     if t not in tokenize(self.goal.type)]
            base = tokenize(self.goal.type)
            query_toks = base + [t for t in extra if t not in base]
            self.active_query = " ".join(query_toks[:MAX_QUERY_TOKENS])
            if "det" in ep.config.modules:
                self._plan_sweep()

    def _plan_sweep(self):
        for _ in range(SWEEP_SECTORS):
            self.plan.append(("detect", ThoughtAction(
                f"Scanning for {self.active_query}.",
                ActionCall("detect_object", {"obj_str": self.active_query}))))
            self.plan.append(("spin", ThoughtAction(
                "Turning to scan the next sector.",
                ActionCall("rotate", {"num": 3}))))


# --- remote chat-model policy ---------------------------------------------------

TASK_PROMPT = """You are a robot in an indoor scene. The user names a goal \
object described with personal attributes; you must find it and confirm with \
the user. You may move, query a semantic map, detect objects in view, \
explore, and store what the user tells you in memory.

Available actions (call exactly one per reply):
  retrieve_memory(obj_str)  - look up objects the user previously confirmed
  retrieve_map(obj_str)     - query the semantic map for a class of object
  detect_object(obj_str)    - detect matching objects in the current view
  double_check(obj_id)      - move closer to an object and detect it again
  search_object(obj_str)    - frontier exploration until something is detected
  goto_point(point=[x, y])  - navigate to map coordinates in meters
  goto_object(obj_id)       - navigate to a detected or retrieved object
  update_memory(obj_id, pos_str, neg_str) - record user feedback about an object
  move(num)                 - num forward steps of 0.25 m (1 <= num <= 40)
  rotate(num)               - num turns of 15 degrees, positive is right
  talk(content)             - say something to the user and wait for a reply

Reply with a single JSON object and nothing else:
{"Thought": "...", "Action": {"name": "...", "args": {...}}}

Here is an example to perform sequential actions:
User Utterance: Find Alice's computer.
{"Thought": "The user wants Alice's computer, I should first search the \
memory to see if I found it before", "Action": {"name": "retrieve_memory", \
"args": {"obj_str": "Alice's computer"}}}
Function Return: Found 0 items in memory: []
{"Thought": "I found a possible computer in the room, it might be the \
correct one, I shall ask the user", "Action": {"name": "talk", "args": \
{"content": "Is this Alice's computer?"}}}
Robot Response: Is this Alice's computer?
User Utterance: No, it's Bob's computer. Keep searching
"""


class RemotePolicy:
    """Chat-endpoint policy: POST {"messages": [...]} -> {"content": "..."}."""

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 3):
        import requests

        self._requests = requests
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def _messages(self, ep: EpisodeRunner) -> list[dict]:
        msgs = [{"role": "system", "content": TASK_PROMPT}]
        for rec in ep.transcript:
            if rec["kind"] == "dialogue" and rec["role"] == "user":
                msgs.append({"role": "user",
                             "content": "User Utterance: " + rec["text"]})
            elif rec["kind"] == "thought_action":
                msgs.append({"role": "assistant", "content": json.dumps(
                    {"Thought": rec["thought"], "Action": rec["action"]})})
            elif rec["kind"] == "function_return":
                msgs.append({"role": "user",
                             "content": "Function Return: " + rec["text"]})
        return msgs

    def step(self, ep: EpisodeRunner) -> ThoughtAction:
        messages = self._messages(ep)
        transport_failures = 0
        for _ in range(self.retries):
            try:
                resp = self._requests.post(self.endpoint,
                                           json={"messages": messages},
                                           timeout=self.timeout)
                resp.raise_for_status()
                content = resp.json()["content"]
            except Exception as e:  # noqa: BLE001 - any transport trouble retries
                transport_failures += 1
                if transport_failures >= self.retries:
                    raise PolicyBackendError(str(e)) from e
                continue
            try:
                return parse_thought_action(content)
            except ActionParseError as e:
                messages.append({"role": "assistant", "content": content})
                messages.append({"role": "user", "content":
                                 f"Parse error: {e}. Reply with exactly one "
                                 f"JSON object with keys Thought and Action."})
        return ThoughtAction("I could not produce a valid action.",
                             ActionCall("talk", {"content": "Could you clarify?"}))
