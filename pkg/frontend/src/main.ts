// Wiring: one WebSocket in, rate-limited commands out, one rAF loop.

import { ConsoleLink } from "./link.js";
import { ConsoleParams, DEFAULT_PARAMS, FW_KEYS, HOST_KEYS, ParamEditor } from "./params.js";
import { RateLimiter, torqueFromDrag } from "./rate.js";
import { drawScene } from "./render.js";
import { torqueMessage } from "./schema.js";
import { ConsoleState } from "./state.js";

const params = new URLSearchParams(location.search);
const wsUrl = params.get("ws") ?? `ws://${location.hostname || "127.0.0.1"}:7751`;
// force->torque map used for the feedback bar; must match the bridge config
const gain = Number(params.get("gain") ?? "0.022");
const fMax = Number(params.get("fmax") ?? "20");

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("banner")!;
const form = document.getElementById("params") as HTMLFormElement;
const formStatus = document.getElementById("param-status")!;

const state = new ConsoleState();
const editor = new ParamEditor((line) => link.send(line));
state.onConfigAck = (ok) => editor.onAck(ok);

const link = new ConsoleLink(wsUrl, {
  onLine: (line) => state.enqueue(line),
  onStatus: (connected) => {
    state.connected = connected;
    banner.textContent = connected ? `connected to ${wsUrl}` : `disconnected from ${wsUrl} - retrying`;
    banner.className = connected ? "ok" : "bad";
  },
});
link.connect();

// --- knob drag -> operator torque, at most 60 msg/s -----------------------

const torqueSender = new RateLimiter<number>(1000 / 60, (tau) => {
  link.send(torqueMessage(tau));
});

let dragOrigin: number | null = null;
canvas.addEventListener("pointerdown", (ev) => {
  if (!state.connected) return; // input disabled while offline
  dragOrigin = ev.clientX;
  canvas.setPointerCapture(ev.pointerId);
});
canvas.addEventListener("pointermove", (ev) => {
  if (dragOrigin === null) return;
  torqueSender.offer(torqueFromDrag(ev.clientX - dragOrigin));
});
const release = () => {
  if (dragOrigin === null) return;
  dragOrigin = null;
  torqueSender.offer(0); // the hand left the knob
};
canvas.addEventListener("pointerup", release);
canvas.addEventListener("pointercancel", release);

// --- parameter form --------------------------------------------------------

const EDITABLE: (keyof ConsoleParams)[] = ["d_adm", "m_adm", "k_min", "k_max", "q_dz", "n", "v_max"];

for (const key of EDITABLE) {
  const row = document.createElement("label");
  row.textContent = key;
  const input = document.createElement("input");
  input.type = "number";
  input.step = "any";
  input.name = key;
  input.value = String(DEFAULT_PARAMS[key]);
  row.appendChild(input);
  form.insertBefore(row, form.querySelector("button"));
}

// edits are collected and shipped at most 5 times a second
const paramSender = new RateLimiter<Partial<ConsoleParams>>(200, (edits) => {
  editor.submit(edits);
});

form.addEventListener("submit", (ev) => {
  ev.preventDefault();
  if (!state.connected) return;
  const edits: Partial<ConsoleParams> = {};
  for (const key of [...FW_KEYS, ...HOST_KEYS]) {
    const input = form.elements.namedItem(key) as HTMLInputElement | null;
    if (input && input.value !== "") edits[key] = Number(input.value);
  }
  paramSender.offer(edits);
});

// --- render loop ------------------------------------------------------------

function frame(): void {
  const now = performance.now();
  state.drain(now);
  drawScene(ctx, state, editor.current, gain, fMax, now);
  formStatus.textContent = editor.status === "idle" ? "" : `${editor.status} ${editor.message}`.trim();
  formStatus.className = editor.status === "pending" ? "pending" : editor.status === "applied" ? "ok" : "bad";
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
