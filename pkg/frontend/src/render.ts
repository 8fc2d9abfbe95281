// Canvas scene: knob dial with deadzone/notch arcs, feedback-torque bar
// with limit marks, and a p vs p_ref strip chart. Geometry helpers are
// pure functions so the interesting math is testable without a canvas.

import { ConsoleParams } from "./params.js";
import { ConsoleState, HistorySample } from "./state.js";

// theta=0 points straight up; positive deflection swings clockwise.
export function knobAngleToXY(theta: number, radius: number): { x: number; y: number } {
  return { x: radius * Math.sin(theta), y: -radius * Math.cos(theta) };
}

/** Signed fill fraction of the torque bar, clamped to [-1, 1]. */
export function barFill(tau: number, tauMax: number): number {
  if (tauMax <= 0) return 0;
  return Math.max(-1, Math.min(1, tau / tauMax));
}

/** The torque the bridge commands for a given contact force. */
export function feedbackTorque(fContact: number, gain: number, fMax: number): number {
  const f = Math.max(-fMax, Math.min(fMax, fContact));
  return -gain * f;
}

export interface ChartScale {
  min: number;
  max: number;
  toY(value: number): number;
}

export function chartScale(values: number[], heightPx: number, padPx = 8): ChartScale {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (!Number.isFinite(min)) {
    min = 0;
    max = 1;
  }
  if (max - min < 1e-6) {
    min -= 0.5;
    max += 0.5;
  }
  const span = max - min;
  const usable = heightPx - 2 * padPx;
  return {
    min,
    max,
    toY: (value: number) => padPx + (1 - (value - min) / span) * usable,
  };
}

/** Wall face estimate: shallowest position ever seen in contact. */
export function wallEstimate(history: HistorySample[]): number | null {
  let wall: number | null = null;
  for (const s of history) {
    if (s.f_contact !== null && s.f_contact > 0 && s.p !== null) {
      if (wall === null || s.p < wall) wall = s.p;
    }
  }
  return wall;
}

const GREY = "#9aa0a6";
const INK = "#202124";
const ACCENT = "#1a73e8";
const WARN = "#d93025";
const SOFT = "#e8eaed";

export function drawScene(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  params: ConsoleParams,
  gain: number,
  fMax: number,
  nowMs: number,
): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.clearRect(0, 0, w, h);
  const stale = state.isStale(nowMs) || !state.connected;
  ctx.save();
  if (stale) ctx.globalAlpha = 0.35;

  drawKnob(ctx, state, params, w * 0.25, h * 0.42, Math.min(w * 0.2, h * 0.34));
  drawTorqueBar(ctx, state, params, gain, fMax, w * 0.05, h * 0.82, w * 0.4, 18);
  drawStrip(ctx, state, w * 0.52, h * 0.08, w * 0.44, h * 0.62);
  drawReadouts(ctx, state, w * 0.52, h * 0.8);

  ctx.restore();
  if (stale) {
    ctx.fillStyle = GREY;
    ctx.font = "bold 16px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(state.connected ? "STALE DATA" : "DISCONNECTED", w / 2, 24);
  }
}

function drawKnob(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  params: ConsoleParams,
  cx: number,
  cy: number,
  r: number,
): void {
  ctx.lineWidth = 2;
  ctx.strokeStyle = INK;
  ctx.beginPath();
  ctx.arc(cx, cy, r, 0, 2 * Math.PI);
  ctx.stroke();

  // travel limits
  for (const side of [-1, 1]) {
    const { x, y } = knobAngleToXY(side * params.theta_max, r);
    ctx.beginPath();
    ctx.moveTo(cx + 0.9 * x, cy + 0.9 * y);
    ctx.lineTo(cx + 1.08 * x, cy + 1.08 * y);
    ctx.stroke();
  }

  // deadzone band (flat feel) and notch boundaries (edge of the plateau)
  const up = -Math.PI / 2;
  ctx.strokeStyle = SOFT;
  ctx.lineWidth = 10;
  ctx.beginPath();
  ctx.arc(cx, cy, r - 8, up - params.q_dz, up + params.q_dz);
  ctx.stroke();
  ctx.strokeStyle = ACCENT;
  ctx.lineWidth = 3;
  for (const side of [-1, 1]) {
    const theta = side * params.n;
    const { x, y } = knobAngleToXY(theta, 1);
    ctx.beginPath();
    ctx.moveTo(cx + (r - 16) * x, cy + (r - 16) * y);
    ctx.lineTo(cx + r * x, cy + r * y);
    ctx.stroke();
  }

  // the needle: most recent theta, straight off the bus
  const theta = state.joystick ? state.joystick.theta : 0;
  const tip = knobAngleToXY(theta, r - 12);
  ctx.strokeStyle = INK;
  ctx.lineWidth = 4;
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(cx + tip.x, cy + tip.y);
  ctx.stroke();
  ctx.fillStyle = INK;
  ctx.font = "13px system-ui, sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(`theta ${theta.toFixed(3)} rad`, cx, cy + r + 22);
}

function drawTorqueBar(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  params: ConsoleParams,
  gain: number,
  fMax: number,
  x: number,
  y: number,
  w: number,
  h: number,
): void {
  const tau = state.robot ? feedbackTorque(state.robot.f_contact, gain, fMax) : 0;
  const fill = barFill(tau, params.tau_max);
  const saturated = Math.abs(fill) >= 1 - 1e-9;

  ctx.strokeStyle = INK;
  ctx.lineWidth = 1;
  ctx.strokeRect(x, y, w, h);
  const mid = x + w / 2;
  ctx.beginPath();
  ctx.moveTo(mid, y - 4);
  ctx.lineTo(mid, y + h + 4);
  ctx.stroke();

  // limit marks at +-tau_max
  ctx.strokeStyle = WARN;
  ctx.lineWidth = 2;
  for (const edge of [x, x + w]) {
    ctx.beginPath();
    ctx.moveTo(edge, y - 6);
    ctx.lineTo(edge, y + h + 6);
    ctx.stroke();
  }

  ctx.fillStyle = saturated ? WARN : ACCENT;
  const px = (fill * w) / 2;
  ctx.fillRect(px >= 0 ? mid : mid + px, y + 2, Math.abs(px), h - 4);

  ctx.fillStyle = INK;
  ctx.font = "13px system-ui, sans-serif";
  ctx.textAlign = "left";
  const label = `feedback ${tau.toFixed(3)} N*m` + (saturated ? "  SATURATED" : "");
  ctx.fillText(label, x, y + h + 20);
}

function drawStrip(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  x: number,
  y: number,
  w: number,
  h: number,
): void {
  ctx.strokeStyle = INK;
  ctx.lineWidth = 1;
  ctx.strokeRect(x, y, w, h);
  const rows = state.history;
  if (rows.length < 2) return;

  const values: number[] = [];
  for (const s of rows) {
    if (s.p !== null) values.push(s.p);
    if (s.p_ref !== null) values.push(s.p_ref);
  }
  const wall = wallEstimate(rows);
  if (wall !== null) values.push(wall);
  const scale = chartScale(values, h);
  const t0 = rows[0].t;
  const t1 = rows[rows.length - 1].t;
  const span = Math.max(t1 - t0, 1e-9);
  const toX = (t: number) => x + ((t - t0) / span) * w;

  const trace = (pick: (s: HistorySample) => number | null, color: string, dash: number[]) => {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.setLineDash(dash);
    ctx.beginPath();
    let started = false;
    for (const s of rows) {
      const v = pick(s);
      if (v === null) continue;
      const px = toX(s.t);
      const py = y + scale.toY(v);
      if (started) ctx.lineTo(px, py);
      else {
        ctx.moveTo(px, py);
        started = true;
      }
    }
    ctx.stroke();
    ctx.setLineDash([]);
  };

  trace((s) => s.p_ref, GREY, [6, 4]);
  trace((s) => s.p, ACCENT, []);

  if (wall !== null) {
    const wy = y + scale.toY(wall);
    ctx.strokeStyle = WARN;
    ctx.lineWidth = 2;
    ctx.setLineDash([2, 3]);
    ctx.beginPath();
    ctx.moveTo(x, wy);
    ctx.lineTo(x + w, wy);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = WARN;
    ctx.font = "11px system-ui, sans-serif";
    ctx.textAlign = "right";
    ctx.fillText("wall", x + w - 4, wy - 4);
  }

  ctx.fillStyle = INK;
  ctx.font = "12px system-ui, sans-serif";
  ctx.textAlign = "left";
  ctx.fillText("p (solid) vs p_ref (dashed), m", x, y - 6);
}

function drawReadouts(ctx: CanvasRenderingContext2D, state: ConsoleState, x: number, y: number): void {
  ctx.fillStyle = INK;
  ctx.font = "13px ui-monospace, monospace";
  ctx.textAlign = "left";
  const j = state.joystick;
  const r = state.robot;
  const lines = [
    j ? `omega ${j.omega.toFixed(3)} rad/s   tau_op ${j.tau_operator.toFixed(3)} N*m` : "no telemetry yet",
    r ? `p ${r.p.toFixed(4)} m   f ${r.f_contact.toFixed(2)} N` : "no robot state yet",
  ];
  lines.forEach((line, i) => ctx.fillText(line, x, y + i * 18));
}
