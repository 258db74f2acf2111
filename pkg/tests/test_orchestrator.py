import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from ipnav.orchestrator import (ActionCall, BadArgsError, BadShapeError,
                                EpisodeConfig, EpisodeRunner, NoJsonError,
                                PolicyBackendError, SceneRun, ThoughtAction,
                                UnknownActionError, parse_thought_action,
                                run_episode)
from ipnav.policy import RemotePolicy, ScriptedPolicy
from ipnav.scenegen import generate_scene
from ipnav.user_sim import TemplateUser


@pytest.fixture(scope="module")
def scene():
    return generate_scene(0)


# --- parsing -----------------------------------------------------------------

def test_parse_valid_reply():
    text = json.dumps({"Thought": "hm", "Action": {
        "name": "talk", "args": {"content": "Is this Alice's computer?"}}})
    ta = parse_thought_action(text)
    assert ta.action.name == "talk"
    assert ta.action.args["content"] == "Is this Alice's computer?"


def test_parse_tolerates_surrounding_prose():
    inner = json.dumps({"Thought": "x", "Action": {
        "name": "move", "args": {"num": 3}}})
    ta = parse_thought_action("Sure! Here is my action:\n" + inner + "\nDone.")
    assert ta.action.name == "move"


def test_parse_unknown_action():
    text = json.dumps({"Thought": "x", "Action": {"name": "fly", "args": {}}})
    with pytest.raises(UnknownActionError):
        parse_thought_action(text)


def test_parse_no_json():
    with pytest.raises(NoJsonError):
        parse_thought_action("I think we should explore")


def test_parse_bad_shape():
    with pytest.raises(BadShapeError):
        parse_thought_action(json.dumps({"Thought": "x"}))
    with pytest.raises(BadShapeError):
        parse_thought_action(json.dumps(
            {"Thought": "x", "Action": {"name": "talk"}, "Extra": 1}))


def test_parse_bad_args():
    with pytest.raises(BadArgsError):
        parse_thought_action(json.dumps(
            {"Thought": "x", "Action": {"name": "talk", "args": {}}}))
    with pytest.raises(BadArgsError):
        parse_thought_action(json.dumps(
            {"Thought": "x", "Action": {"name": "move",
                                        "args": {"num": 99}}}))
    with pytest.raises(BadArgsError):
        parse_thought_action(json.dumps(
            {"Thought": "x", "Action": {"name": "talk",
                                        "args": {"content": "a", "x": 1}}}))
    with pytest.raises(BadArgsError):
        parse_thought_action(json.dumps(
            {"Thought": "x", "Action": {"name": "update_memory",
                                        "args": {"obj_id": "obj_1"}}}))


# --- dispatch ----------------------------------------------------------------

def make_runner(scene, **kw):
    cfg = EpisodeConfig.from_preset(kw.pop("preset", "orion"), **kw)
    run = SceneRun(scene, cfg, seed=0)
    return EpisodeRunner(run, scene.goals[0], ScriptedPolicy())


def test_fresh_memory_message(scene):
    runner = make_runner(scene)
    ret = runner.dispatch(ActionCall("retrieve_memory",
                                     {"obj_str": "alice's computer"}))
    assert ret == "Found 0 items in memory: []"


def test_detect_format(scene):
    runner = make_runner(scene)
    cls = scene.goals[0].type
    ret = runner.dispatch(ActionCall("detect_object", {"obj_str": cls}))
    assert ret.startswith("Found ")
    if not ret.startswith("Found 0"):
        assert "m, " in ret and "°" in ret


def test_unknown_object_id_is_error_string(scene):
    runner = make_runner(scene)
    ret = runner.dispatch(ActionCall("goto_object", {"obj_id": "obj_99"}))
    assert ret.startswith("Error:")
    assert "obj_99" in ret


def test_ablated_module_message(scene):
    runner = make_runner(scene, ablate=frozenset({"map"}))
    ret = runner.dispatch(ActionCall("retrieve_map", {"obj_str": "computer"}))
    assert ret == "The semantic map module is unavailable."


def test_preset_module_sets():
    from ipnav.orchestrator import PRESETS
    assert PRESETS["cow"] == {"det", "exp"}
    assert PRESETS["vlmap"] == {"map"}
    assert "mem" in PRESETS["orion"]
    cf = EpisodeConfig.from_preset("cf")
    orion = EpisodeConfig.from_preset("orion")
    assert cf.map_threshold == pytest.approx(orion.map_threshold - 0.05)


def test_det_ablation_degrades_instead_of_removing():
    cfg = EpisodeConfig.from_preset("orion", ablate=frozenset({"det"}))
    assert "det" in cfg.modules
    det = cfg.detector()
    base = EpisodeConfig.from_preset("orion").detector()
    assert det.sigma == pytest.approx(base.sigma * 4)
    assert det.threshold == pytest.approx(base.threshold - 0.1)


def test_move_and_rotate_messages(scene):
    runner = make_runner(scene)
    ret = runner.dispatch(ActionCall("rotate", {"num": -2}))
    assert ret.startswith("Rotated 30° left.")
    ret = runner.dispatch(ActionCall("move", {"num": 2}))
    assert ret.startswith("Moved ")


# --- episode lifecycle --------------------------------------------------------

def test_episode_none_regime_single_interaction(scene):
    cfg = EpisodeConfig.from_preset("orion", feedback="none")
    run = SceneRun(scene, cfg, seed=0)
    user = TemplateUser("none", scene, seed=0)
    runner = run_episode(run, scene.goals[0], ScriptedPolicy(), user)
    assert runner.talk_count == 1
    assert runner.status in ("Success", "Failed")


def test_episode_interaction_cap(scene):
    cfg = EpisodeConfig.from_preset("orion", feedback="yesno")
    run = SceneRun(scene, cfg, seed=0)
    user = TemplateUser("yesno", scene, seed=0)
    statuses = []
    policy = ScriptedPolicy()
    for goal in scene.goals:
        runner = run_episode(run, goal, policy, user)
        statuses.append(runner)
        assert 1 <= runner.talk_count <= 5
        if runner.status == "Failed":
            assert runner.talk_count == 5 or runner.fail_reason
    assert any(r.status == "Success" for r in statuses)


def test_success_implies_interaction(scene):
    cfg = EpisodeConfig.from_preset("orion", feedback="mixed")
    run = SceneRun(scene, cfg, seed=0)
    user = TemplateUser("mixed", scene, seed=0)
    runner = run_episode(run, scene.goals[0], ScriptedPolicy(), user)
    if runner.status == "Success":
        assert runner.talk_count >= 1


def test_transcript_monotone_steps(scene):
    cfg = EpisodeConfig.from_preset("orion", feedback="mixed")
    run = SceneRun(scene, cfg, seed=0)
    user = TemplateUser("mixed", scene, seed=0)
    runner = run_episode(run, scene.goals[0], ScriptedPolicy(), user)
    steps = [rec["step"] for rec in runner.transcript]
    assert steps == sorted(steps)
    assert len(set(steps)) == len(steps)


def test_deterministic_transcripts(scene):
    out = []
    for _ in range(2):
        cfg = EpisodeConfig.from_preset("orion", feedback="mixed")
        run = SceneRun(scene, cfg, seed=0)
        user = TemplateUser("mixed", scene, seed=0)
        transcripts = []
        policy = ScriptedPolicy()
        for goal in scene.goals[:3]:
            runner = run_episode(run, goal, policy, user)
            transcripts.append(json.dumps(runner.transcript, sort_keys=True))
        out.append(transcripts)
    assert out[0] == out[1]


# --- remote policy -------------------------------------------------------------

class _StubChat(BaseHTTPRequestHandler):
    replies = []
    requests_seen = 0

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        json.loads(self.rfile.read(length))
        type(self).requests_seen += 1
        reply = self.replies.pop(0) if self.replies else json.dumps({
            "Thought": "done", "Action": {"name": "talk",
                                          "args": {"content": "hello"}}})
        body = json.dumps({"content": reply}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *a):
        pass


@pytest.fixture
def stub_chat():
    server = HTTPServer(("127.0.0.1", 0), _StubChat)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubChat.requests_seen = 0
    _StubChat.replies = []
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def test_remote_policy_happy_path(scene, stub_chat):
    _StubChat.replies = [json.dumps({
        "Thought": "look it up",
        "Action": {"name": "retrieve_memory",
                   "args": {"obj_str": "alice's computer"}}})]
    runner = make_runner(scene)
    policy = RemotePolicy(stub_chat)
    ta = policy.step(runner)
    assert ta.action.name == "retrieve_memory"
    assert _StubChat.requests_seen == 1


def test_remote_policy_retries_then_succeeds(scene, stub_chat):
    good = json.dumps({"Thought": "ok", "Action": {
        "name": "move", "args": {"num": 1}}})
    _StubChat.replies = ["garbage", "{\"Thought\": \"incomplete\"}", good]
    runner = make_runner(scene)
    policy = RemotePolicy(stub_chat)
    ta = policy.step(runner)
    assert ta.action.name == "move"
    assert _StubChat.requests_seen == 3


def test_remote_policy_fallback_after_bad_replies(scene, stub_chat):
    _StubChat.replies = ["junk", "junk", "junk"]
    runner = make_runner(scene)
    policy = RemotePolicy(stub_chat)
    ta = policy.step(runner)
    assert ta.action.name == "talk"
    assert ta.action.args["content"] == "Could you clarify?"


def test_remote_policy_endpoint_down(scene):
    runner = make_runner(scene)
    policy = RemotePolicy("http://127.0.0.1:1", timeout=0.2)
    with pytest.raises(PolicyBackendError):
        policy.step(runner)


def test_remote_episode_end_to_end(scene, stub_chat):
    """A remote policy that talks immediately terminates at I_max denials."""
    cfg = EpisodeConfig.from_preset("orion", feedback="yesno")
    run = SceneRun(scene, cfg, seed=0)
    user = TemplateUser("yesno", scene, seed=0)
    runner = run_episode(run, scene.goals[0], RemotePolicy(stub_chat), user)
    assert runner.status in ("Success", "Failed")
    assert runner.talk_count <= cfg.i_max
