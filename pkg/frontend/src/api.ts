// Typed client for the episode service REST contract. The UI never talks to
// anything else; every fact it renders comes from these responses.

export interface SceneGoal {
  index: number;
  name: string;
}

export interface SceneInfo {
  id: string;
  goals: SceneGoal[];
}

export interface StepResult {
  status: SessionStatus;
  events: unknown[];
  talk: string | null;
}

export type SessionStatus = "AgentRunning" | "AwaitingUser" | "Terminal";

export interface DialogueTurn {
  role: "robot" | "user";
  text: string;
}

export interface ObjectMarker {
  obj_id: string;
  x: number;
  y: number;
}

export interface Snapshot {
  session_id: string;
  status: SessionStatus;
  rows: number;
  cols: number;
  resolution: number;
  occupancy_rle: [number, number][];
  known_free: number;
  known_occupied: number;
  pose: { x: number; y: number; heading: number };
  trajectory: [number, number][];
  objects: ObjectMarker[];
  dialogue: DialogueTurn[];
  goal_name: string;
  metrics: { S: number; a: number; I: number; status: string };
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    const msg = (body as { error?: string }).error ?? resp.statusText;
    throw new ApiError(resp.status, msg);
  }
  return body as T;
}

export class Client {
  constructor(readonly base: string) {}

  listScenes(): Promise<{ scenes: SceneInfo[] }> {
    return request(`${this.base}/scenes`);
  }

  createSession(sceneId: string, goalIndex: number): Promise<{
    session_id: string;
    status: SessionStatus;
    goal_name: string;
  }> {
    return request(`${this.base}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        scene_id: sceneId,
        goal_index: goalIndex,
        mode: "human-user",
        feedback: "mixed",
      }),
    });
  }

  step(sessionId: string): Promise<StepResult> {
    return request(`${this.base}/sessions/${sessionId}/step`, {
      method: "POST",
    });
  }

  sendMessage(sessionId: string, text: string): Promise<{ status: SessionStatus }> {
    return request(`${this.base}/sessions/${sessionId}/message`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  state(sessionId: string, reveal = false): Promise<Snapshot> {
    const q = reveal ? "?reveal=true" : "";
    return request(`${this.base}/sessions/${sessionId}/state${q}`);
  }
}
