import json

import pytest
from fastapi.testclient import TestClient

from ipnav.harness import SuiteConfig, run_suite
from ipnav.scene import save_scene
from ipnav.scenegen import generate_scene
from ipnav.service import create_app


@pytest.fixture(scope="module")
def scene():
    return generate_scene(0)


@pytest.fixture(scope="module")
def client(scene, tmp_path_factory):
    d = tmp_path_factory.mktemp("scenes")
    (d / "s0.json").write_text(save_scene(scene))
    return TestClient(create_app(str(d)))


def start(client, scene, mode="human-user", goal_index=0, feedback="mixed"):
    resp = client.post("/sessions", json={
        "scene_id": scene.id, "goal_index": goal_index, "mode": mode,
        "feedback": feedback, "seed": 0})
    assert resp.status_code == 200, resp.text
    return resp.json()["session_id"]


def step_until_talk(client, sid, limit=30):
    for _ in range(limit):
        resp = client.post(f"/sessions/{sid}/step")
        assert resp.status_code == 200, resp.text
        body = resp.json()
        if body["status"] in ("AwaitingUser", "Terminal"):
            return body
    raise AssertionError("no talk reached")


def test_scenes_listing(client, scene):
    body = client.get("/scenes").json()
    assert body["scenes"][0]["id"] == scene.id
    assert len(body["scenes"][0]["goals"]) == len(scene.goals)


def test_unknown_scene_404(client):
    resp = client.post("/sessions", json={"scene_id": "nope"})
    assert resp.status_code == 404
    assert "error" in resp.json()


def test_session_lifecycle_and_conflicts(client, scene):
    sid = start(client, scene)
    state = client.get(f"/sessions/{sid}/state").json()
    assert state["status"] == "AgentRunning"
    assert state["trajectory"] == [state["trajectory"][0]]

    body = step_until_talk(client, sid)
    assert body["talk"]
    if body["status"] == "AwaitingUser":
        # stepping again while awaiting input conflicts
        assert client.post(f"/sessions/{sid}/step").status_code == 409
        resp = client.post(f"/sessions/{sid}/message",
                           json={"text": "No, keep searching."})
        assert resp.status_code == 200


def test_message_in_running_state_conflicts(client, scene):
    sid = start(client, scene)
    resp = client.post(f"/sessions/{sid}/message", json={"text": "hi"})
    assert resp.status_code == 409


def test_simulated_mode_runs_to_terminal(client, scene):
    sid = start(client, scene, mode="simulated-user")
    for _ in range(40):
        resp = client.post(f"/sessions/{sid}/step")
        if resp.status_code == 409:
            break
        if resp.json()["status"] == "Terminal":
            break
    state = client.get(f"/sessions/{sid}/state").json()
    assert state["status"] == "Terminal"
    assert state["metrics"]["status"] in ("Success", "Failed")
    # messages rejected in simulated mode regardless of state
    resp = client.post(f"/sessions/{sid}/message", json={"text": "hello"})
    assert resp.status_code == 409


def test_snapshot_counts_match_rle(client, scene):
    sid = start(client, scene)
    client.post(f"/sessions/{sid}/step")
    state = client.get(f"/sessions/{sid}/state").json()
    decoded = []
    for val, count in state["occupancy_rle"]:
        decoded.extend([val] * count)
    assert len(decoded) == state["rows"] * state["cols"]
    assert decoded.count(0) == state["known_free"]
    assert decoded.count(1) == state["known_occupied"]


def test_snapshot_hides_ground_truth(client, scene):
    sid = start(client, scene)
    body = client.post(f"/sessions/{sid}/step").json()
    if body["status"] != "Terminal":
        # reveal is only honored at terminal; live sessions never leak
        live = client.get(f"/sessions/{sid}/state?reveal=true").json()
        assert "reveal" not in live
    state = client.get(f"/sessions/{sid}/state").json()
    text = json.dumps(state)
    for obj in scene.objects:
        assert obj.gid not in text
    for marker in state["objects"]:
        assert marker["obj_id"].startswith("obj_")


def test_reveal_after_terminal(client, scene):
    sid = start(client, scene, mode="simulated-user")
    for _ in range(40):
        resp = client.post(f"/sessions/{sid}/step")
        if resp.status_code == 409 or resp.json()["status"] == "Terminal":
            break
    state = client.get(f"/sessions/{sid}/state?reveal=true").json()
    assert "reveal" in state
    assert state["reveal"]["target_gid"] == scene.goals[0].target_gid


def test_sessions_are_independent(client, scene):
    a = start(client, scene)
    b = start(client, scene)
    client.post(f"/sessions/{a}/step")
    sa = client.get(f"/sessions/{a}/state").json()
    sb = client.get(f"/sessions/{b}/state").json()
    assert len(sa["dialogue"]) >= len(sb["dialogue"])
    assert sa["session_id"] != sb["session_id"]


def headless_reference(scene, goal_index=0):
    from ipnav.orchestrator import EpisodeConfig, SceneRun, run_episode
    from ipnav.policy import ScriptedPolicy
    from ipnav.user_sim import TemplateUser
    run = SceneRun(scene, EpisodeConfig.from_preset("orion", feedback="mixed"),
                   seed=0)
    return run_episode(run, scene.goals[goal_index], ScriptedPolicy(),
                       TemplateUser("mixed", scene, seed=0))


def test_human_mode_transparency(client, scene):
    """A human typing exactly the template user's utterances reproduces the
    headless transcript."""
    runner = headless_reference(scene)
    ref_dialogue = [(r["role"], r["text"]) for r in runner.transcript
                    if r["kind"] == "dialogue"]
    denials = [t for role, t in ref_dialogue
               if role == "user" and not t.lower().startswith("yes")
               and not t.startswith("Find ")]

    sid = start(client, scene, mode="human-user", goal_index=0)
    fed = 0
    for _ in range(12):
        body = step_until_talk(client, sid)
        if body["status"] == "Terminal":
            break
        resp = client.post(f"/sessions/{sid}/message",
                           json={"text": denials[fed]})
        assert resp.status_code == 200, resp.text
        fed += 1
    state = client.get(f"/sessions/{sid}/state").json()
    got = [(d["role"], d["text"]) for d in state["dialogue"]]
    assert got == ref_dialogue
    assert state["metrics"]["status"] == runner.status
