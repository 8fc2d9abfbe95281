// Parameter editing with an optimistic-lock flow: validate locally,
// send, show pending, apply on ack, revert on nack or timeout. The
// firmware applies its nine fields as one atomic snapshot, so any edit
// touching them ships the full set.

import { paramsMessage } from "./schema.js";

export interface ConsoleParams {
  d_adm: number;
  m_adm: number;
  tau_max: number;
  theta0: number;
  q_dz: number;
  n: number;
  k_min: number;
  k_max: number;
  theta_max: number;
  v_max: number;
  input_deadzone: number;
}

export const FW_KEYS = [
  "d_adm",
  "m_adm",
  "tau_max",
  "theta0",
  "q_dz",
  "n",
  "k_min",
  "k_max",
  "theta_max",
] as const;

export const HOST_KEYS = ["v_max", "input_deadzone"] as const;

// Shipped controller defaults; there is no parameter-readback topic, so
// the console starts from the same values the device boots with.
export const DEFAULT_PARAMS: ConsoleParams = {
  d_adm: 0.01,
  m_adm: 0.1,
  tau_max: 0.44,
  theta0: 0.0,
  q_dz: 0.05,
  n: 0.3,
  k_min: 0.2,
  k_max: 1.0,
  theta_max: 1.0,
  v_max: 2.0,
  input_deadzone: 0.05,
};

/** Mirror of the device-side invariants; one message per violation. */
export function validateParams(p: ConsoleParams): string[] {
  const errors: string[] = [];
  for (const [key, value] of Object.entries(p)) {
    if (!Number.isFinite(value)) errors.push(`${key}: must be a finite number`);
  }
  if (errors.length) return errors;
  if (p.d_adm <= 0) errors.push("d_adm: must be > 0");
  if (p.m_adm <= 0) errors.push("m_adm: must be > 0");
  if (p.tau_max <= 0) errors.push("tau_max: must be > 0");
  if (p.q_dz < 0) errors.push("q_dz: must be >= 0");
  if (p.n <= p.q_dz) errors.push("n: must be > q_dz");
  if (p.k_min < 0) errors.push("k_min: must be >= 0");
  if (p.k_max < p.k_min) errors.push("k_max: must be >= k_min");
  if (p.theta_max <= 0) errors.push("theta_max: must be > 0");
  if (p.v_max <= 0) errors.push("v_max: must be > 0");
  if (p.input_deadzone < 0) errors.push("input_deadzone: must be >= 0");
  return errors;
}

export type EditorStatus = "idle" | "pending" | "applied" | "rejected" | "timeout" | "invalid";

export const ACK_TIMEOUT_MS = 2000;

export class ParamEditor {
  current: ConsoleParams = { ...DEFAULT_PARAMS };
  status: EditorStatus = "idle";
  message = "";

  private inFlight: ConsoleParams | null = null;
  private timer: unknown = null;

  constructor(
    private send: (line: string) => void,
    private schedule: (fn: () => void, ms: number) => unknown = (fn, ms) => setTimeout(fn, ms),
    private cancel: (h: unknown) => void = (h) => clearTimeout(h as number),
  ) {}

  /** Validate and ship an edit; returns the local validation errors. */
  submit(edits: Partial<ConsoleParams>): string[] {
    const proposed: ConsoleParams = { ...this.current, ...edits };
    const errors = validateParams(proposed);
    if (errors.length) {
      this.status = "invalid";
      this.message = errors.join("; ");
      return errors;
    }
    const touchesFw = FW_KEYS.some((k) => proposed[k] !== this.current[k]);
    const body: Record<string, number> = {};
    if (touchesFw) {
      for (const k of FW_KEYS) body[k] = proposed[k]; // atomic snapshot
    }
    for (const k of HOST_KEYS) {
      if (proposed[k] !== this.current[k]) body[k] = proposed[k];
    }
    if (Object.keys(body).length === 0) {
      this.status = "idle";
      this.message = "no change";
      return [];
    }
    this.send(paramsMessage(body));
    this.inFlight = proposed;
    this.status = "pending";
    this.message = "waiting for device";
    this.armTimeout();
    return [];
  }

  onAck(ok: boolean): void {
    if (this.inFlight === null) return; // unsolicited ack; ignore
    this.disarm();
    if (ok) {
      this.current = this.inFlight;
      this.status = "applied";
      this.message = "";
    } else {
      this.status = "rejected";
      this.message = "device rejected the edit; values reverted";
    }
    this.inFlight = null;
  }

  private armTimeout(): void {
    this.disarm();
    this.timer = this.schedule(() => {
      this.timer = null;
      if (this.inFlight === null) return;
      this.inFlight = null;
      this.status = "timeout";
      this.message = "no acknowledgment; values reverted";
    }, ACK_TIMEOUT_MS);
  }

  private disarm(): void {
    if (this.timer !== null) {
      this.cancel(this.timer);
      this.timer = null;
    }
  }
}
