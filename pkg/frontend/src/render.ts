// Canvas renderer: known occupancy, trajectory polyline, pose triangle,
// object markers. Unknown space stays as fog.

import type { Snapshot } from "./api.js";
import { decodeRle } from "./rle.js";

export interface Transform {
  scale: number; // pixels per meter
  offsetX: number;
  offsetY: number;
}

export function fitTransform(snap: Snapshot, width: number, height: number): Transform {
  const worldW = snap.cols * snap.resolution;
  const worldH = snap.rows * snap.resolution;
  const scale = Math.min(width / worldW, height / worldH);
  return { scale, offsetX: 0, offsetY: 0 };
}

export function worldToPx(t: Transform, x: number, y: number): [number, number] {
  return [(x + t.offsetX) * t.scale, (y + t.offsetY) * t.scale];
}

const COLOR_UNKNOWN = "#2a2d34";
const COLOR_FREE = "#e8e6df";
const COLOR_OCCUPIED = "#4a4e5a";
const COLOR_TRAJECTORY = "#2b7de9";
const COLOR_POSE = "#e2574c";
const COLOR_MARKER = "#2e9e5b";

export function renderSnapshot(
  ctx: CanvasRenderingContext2D,
  snap: Snapshot,
  t: Transform,
): void {
  const cells = decodeRle(snap.occupancy_rle, snap.rows * snap.cols);
  const res = snap.resolution;
  const cellPx = res * t.scale;
  ctx.fillStyle = COLOR_UNKNOWN;
  ctx.fillRect(0, 0, snap.cols * cellPx, snap.rows * cellPx);
  for (let r = 0; r < snap.rows; r++) {
    for (let c = 0; c < snap.cols; c++) {
      const v = cells[r * snap.cols + c];
      if (v === -1) continue;
      ctx.fillStyle = v === 0 ? COLOR_FREE : COLOR_OCCUPIED;
      const [px, py] = worldToPx(t, c * res, r * res);
      ctx.fillRect(px, py, cellPx + 0.5, cellPx + 0.5);
    }
  }

  if (snap.trajectory.length > 1) {
    ctx.strokeStyle = COLOR_TRAJECTORY;
    ctx.lineWidth = 2;
    ctx.beginPath();
    const [x0, y0] = worldToPx(t, snap.trajectory[0][0], snap.trajectory[0][1]);
    ctx.moveTo(x0, y0);
    for (const [x, y] of snap.trajectory.slice(1)) {
      const [px, py] = worldToPx(t, x, y);
      ctx.lineTo(px, py);
    }
    ctx.stroke();
  }

  for (const marker of snap.objects) {
    const [px, py] = worldToPx(t, marker.x, marker.y);
    ctx.fillStyle = COLOR_MARKER;
    ctx.beginPath();
    ctx.arc(px, py, 4, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillStyle = "#1c5c38";
    ctx.font = "10px sans-serif";
    ctx.fillText(marker.obj_id, px + 6, py + 3);
  }

  drawPose(ctx, snap, t);
}

function drawPose(ctx: CanvasRenderingContext2D, snap: Snapshot, t: Transform): void {
  const { x, y, heading } = snap.pose;
  const [px, py] = worldToPx(t, x, y);
  const rad = (heading * Math.PI) / 180;
  const size = Math.max(6, 0.3 * t.scale);
  ctx.fillStyle = COLOR_POSE;
  ctx.beginPath();
  ctx.moveTo(px + size * Math.cos(rad), py + size * Math.sin(rad));
  ctx.lineTo(px + size * Math.cos(rad + 2.5), py + size * Math.sin(rad + 2.5));
  ctx.lineTo(px + size * Math.cos(rad - 2.5), py + size * Math.sin(rad - 2.5));
  ctx.closePath();
  ctx.fill();
}
