// View-side session state: what the panel shows and when typing is allowed.
// Input is enabled exactly when the server reports AwaitingUser.

import type { Snapshot, SessionStatus } from "./api.js";

export interface ViewState {
  sessionId: string | null;
  goalName: string;
  status: SessionStatus | "Idle";
  snapshot: Snapshot | null;
  inputEnabled: boolean;
  banner: string | null;
}

export function initialView(): ViewState {
  return {
    sessionId: null,
    goalName: "",
    status: "Idle",
    snapshot: null,
    inputEnabled: false,
    banner: null,
  };
}

export function applySnapshot(view: ViewState, snap: Snapshot): ViewState {
  const status = snap.status;
  return {
    ...view,
    status,
    snapshot: snap,
    inputEnabled: status === "AwaitingUser",
    banner: status === "Terminal" ? terminalBanner(snap) : view.banner,
  };
}

export function terminalBanner(snap: Snapshot): string {
  const m = snap.metrics;
  const verdict = m.S === 1 ? "Success" : "Failed";
  return `${verdict}: S=${m.S}  path=${m.a.toFixed(2)}m  turns=${m.I}`;
}

// Poll fast while the agent moves, idle while the human thinks.
export function pollIntervalMs(status: ViewState["status"]): number | null {
  if (status === "AgentRunning") return 250;
  if (status === "AwaitingUser") return null;
  return null;
}
