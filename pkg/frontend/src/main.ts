// Wiring: scene picker, start button, canvas polling loop, chat panel.

import { ApiError, Client, Snapshot } from "./api.js";
import { HINT_CHIPS } from "./templates.js";
import { applySnapshot, initialView, pollIntervalMs, ViewState } from "./state.js";
import { fitTransform, renderSnapshot } from "./render.js";

const SERVER = (window as unknown as { IPNAV_SERVER?: string }).IPNAV_SERVER
  ?? "http://127.0.0.1:8008";

const client = new Client(SERVER);
let view: ViewState = initialView();
let pollTimer: number | null = null;

const el = {
  scene: document.getElementById("scene") as HTMLSelectElement,
  goal: document.getElementById("goal") as HTMLSelectElement,
  start: document.getElementById("start") as HTMLButtonElement,
  canvas: document.getElementById("map") as HTMLCanvasElement,
  chat: document.getElementById("chat") as HTMLDivElement,
  input: document.getElementById("message") as HTMLInputElement,
  send: document.getElementById("send") as HTMLButtonElement,
  banner: document.getElementById("banner") as HTMLDivElement,
  goalLabel: document.getElementById("goal-label") as HTMLDivElement,
  chips: document.getElementById("chips") as HTMLDivElement,
};

function showError(message: string): void {
  el.banner.textContent = message;
  el.banner.className = "banner error";
  el.banner.hidden = false;
}

async function loadScenes(): Promise<void> {
  try {
    const { scenes } = await client.listScenes();
    el.scene.innerHTML = "";
    for (const s of scenes) {
      const opt = document.createElement("option");
      opt.value = s.id;
      opt.textContent = s.id;
      el.scene.appendChild(opt);
    }
    refreshGoals(scenes);
    el.scene.onchange = () => refreshGoals(scenes);
  } catch (e) {
    showError(`server unreachable: ${String(e)}`);
  }
}

function refreshGoals(scenes: { id: string; goals: { index: number; name: string }[] }[]): void {
  const scene = scenes.find((s) => s.id === el.scene.value) ?? scenes[0];
  el.goal.innerHTML = "";
  for (const g of scene.goals) {
    const opt = document.createElement("option");
    opt.value = String(g.index);
    opt.textContent = g.name;
    el.goal.appendChild(opt);
  }
}

function renderChat(snap: Snapshot): void {
  el.chat.innerHTML = "";
  for (const turn of snap.dialogue) {
    const div = document.createElement("div");
    div.className = `turn ${turn.role}`;
    div.textContent = `${turn.role === "robot" ? "robot" : "you"}: ${turn.text}`;
    el.chat.appendChild(div);
  }
  el.chat.scrollTop = el.chat.scrollHeight;
}

function paint(snap: Snapshot): void {
  const ctx = el.canvas.getContext("2d");
  if (!ctx) return;
  try {
    const t = fitTransform(snap, el.canvas.width, el.canvas.height);
    ctx.clearRect(0, 0, el.canvas.width, el.canvas.height);
    renderSnapshot(ctx, snap, t);
  } catch (e) {
    console.warn("skipped malformed snapshot", e);
  }
}

function apply(snap: Snapshot): void {
  view = applySnapshot(view, snap);
  paint(snap);
  renderChat(snap);
  el.input.disabled = !view.inputEnabled;
  el.send.disabled = !view.inputEnabled;
  if (view.status === "Terminal" && view.banner) {
    el.banner.textContent = view.banner;
    el.banner.className = "banner terminal";
    el.banner.hidden = false;
  }
}

async function refresh(): Promise<void> {
  if (!view.sessionId) return;
  apply(await client.state(view.sessionId));
}

function schedule(): void {
  if (pollTimer !== null) window.clearTimeout(pollTimer);
  const interval = pollIntervalMs(view.status);
  if (interval === null) return;
  pollTimer = window.setTimeout(async () => {
    if (!view.sessionId) return;
    try {
      if (view.status === "AgentRunning") {
        await client.step(view.sessionId);
      }
      await refresh();
    } catch (e) {
      if (!(e instanceof ApiError && e.status === 409)) {
        showError(String(e));
      }
      await refresh().catch(() => undefined);
    }
    schedule();
  }, interval);
}

async function start(): Promise<void> {
  try {
    const created = await client.createSession(el.scene.value,
                                               Number(el.goal.value));
    view = { ...initialView(), sessionId: created.session_id,
             goalName: created.goal_name, status: created.status };
    el.goalLabel.textContent = `goal: ${created.goal_name}`;
    el.banner.hidden = true;
    await refresh();
    schedule();
  } catch (e) {
    showError(String(e));
  }
}

async function send(): Promise<void> {
  const text = el.input.value.trim();
  if (!text || !view.sessionId) return;
  try {
    await client.sendMessage(view.sessionId, text);
    el.input.value = "";
    el.input.disabled = true;
    el.send.disabled = true;
    await refresh();
    schedule();
  } catch (e) {
    if (e instanceof ApiError && e.status === 409) {
      showError("agent is moving");
    } else {
      showError(String(e));
    }
  }
}

function mountChips(): void {
  for (const chip of HINT_CHIPS) {
    const b = document.createElement("button");
    b.className = "chip";
    b.textContent = chip.label;
    b.onclick = () => {
      el.input.value = chip.template;
      el.input.focus();
    };
    el.chips.appendChild(b);
  }
}

el.start.onclick = () => void start();
el.send.onclick = () => void send();
el.input.onkeydown = (ev) => {
  if (ev.key === "Enter") void send();
};
mountChips();
void loadScenes();
