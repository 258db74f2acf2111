// End-to-end round trip against the real backend: start an episode, inject
// one landmark feedback message, watch the trajectory extend toward the
// landmark's marker, and reach a terminal banner. Snapshot-decoded cell
// counts must match the server's metadata.

import { spawn, execFileSync, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { Client, Snapshot } from "../src/api.js";
import { countValues, decodeRle } from "../src/rle.js";
import { applySnapshot, initialView } from "../src/state.js";

const PORT = 8177;
const BASE = `http://127.0.0.1:${PORT}`;
let server: ChildProcess;

async function waitForServer(client: Client): Promise<void> {
  for (let i = 0; i < 60; i++) {
    try {
      await client.listScenes();
      return;
    } catch {
      await new Promise((r) => setTimeout(r, 500));
    }
  }
  throw new Error("backend did not come up");
}

beforeAll(async () => {
  const sceneDir = mkdtempSync(join(tmpdir(), "ipnav-scenes-"));
  execFileSync("python3", ["-m", "ipnav.cli", "gen-scene", "--seed", "0",
                           "--out", join(sceneDir, "scene0.json")]);
  server = spawn("python3", ["-m", "ipnav.cli", "serve", "--scenes", sceneDir,
                             "--port", String(PORT)],
                 { stdio: "inherit" });
  await waitForServer(new Client(BASE));
}, 60_000);

afterAll(() => {
  server?.kill();
});

async function stepUntilNotRunning(client: Client, sid: string): Promise<Snapshot> {
  for (let i = 0; i < 60; i++) {
    const snap = await client.state(sid);
    if (snap.status !== "AgentRunning") return snap;
    await client.step(sid);
  }
  throw new Error("agent never paused");
}

function distance(a: [number, number], b: { x: number; y: number }): number {
  return Math.hypot(a[0] - b.x, a[1] - b.y);
}

describe("ui round trip", () => {
  it("steers the agent with landmark feedback to a terminal banner", async () => {
    const client = new Client(BASE);
    const { scenes } = await client.listScenes();
    expect(scenes.length).toBeGreaterThan(0);

    // find a goal whose first confirmation is denied, so there is a talk
    // to answer with landmark feedback
    let created: Awaited<ReturnType<Client["createSession"]>> | null = null;
    let snap: Snapshot | null = null;
    for (const goal of scenes[0].goals) {
      const c = await client.createSession(scenes[0].id, goal.index);
      const s = await stepUntilNotRunning(client, c.session_id);
      if (s.status === "AwaitingUser") {
        created = c;
        snap = s;
        break;
      }
    }
    if (!created || !snap) throw new Error("no goal paused for feedback");
    let view = initialView();
    view = { ...view, sessionId: created.session_id, goalName: created.goal_name };
    view = applySnapshot(view, snap);

    // snapshot-decoded cell counts match server metadata
    const counts = countValues(decodeRle(snap.occupancy_rle, snap.rows * snap.cols));
    expect(counts.free).toBe(snap.known_free);
    expect(counts.occupied).toBe(snap.known_occupied);

    // feed one landmark hint, then watch the trajectory close in on the
    // landmark's new marker
    let steered = false;
    for (let round = 0; round < 6 && snap.status === "AwaitingUser"; round++) {
      expect(view.inputEnabled).toBe(true);
      if (!steered) {
        const markersBefore = new Set(snap.objects.map((m) => m.obj_id));
        const trailBefore = snap.trajectory.length;
        const endBefore = snap.trajectory[snap.trajectory.length - 1];
        await client.sendMessage(created.session_id, "No. It is near the fridge.");
        snap = await stepUntilNotRunning(client, created.session_id);
        view = applySnapshot(view, snap);
        const fresh = snap.objects.filter((m) => !markersBefore.has(m.obj_id));
        if (fresh.length > 0) {
          const landmark = fresh[0];
          const added = snap.trajectory.slice(trailBefore);
          const closest = Math.min(
            ...added.map((p) => distance(p, landmark)));
          expect(closest).toBeLessThan(distance(endBefore, landmark));
          steered = true;
        }
      } else {
        await client.sendMessage(created.session_id, "No, keep searching.");
        snap = await stepUntilNotRunning(client, created.session_id);
        view = applySnapshot(view, snap);
      }
    }

    expect(steered).toBe(true);
    expect(snap.status).toBe("Terminal");
    view = applySnapshot(view, snap);
    expect(view.banner).toMatch(/Success|Failed/);
    expect(view.inputEnabled).toBe(false);
  }, 120_000);
});
