// Bus message shapes, one-to-one with the NDJSON the bridge publishes.
// The console renders these and nothing else: every number on screen is
// traceable to a parsed message.

export interface JoystickBody {
  theta: number;
  omega: number;
  tau_operator: number;
}

export interface RobotRefBody {
  v_ref: number;
  p_ref: number;
}

export interface RobotStateBody {
  p: number;
  v: number;
  f_contact: number;
}

// Periodic counters and interleaved events share the diag topic.
export interface BridgeDiagBody {
  event?: string;
  ok?: boolean;
  [counter: string]: unknown;
}

export interface BusMessage {
  topic: string;
  t: number;
  body: Record<string, unknown>;
}

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

function finiteNumbers(body: Record<string, unknown>, keys: string[]): boolean {
  return keys.every((k) => typeof body[k] === "number" && Number.isFinite(body[k]));
}

const REQUIRED: Record<string, string[]> = {
  "joystick/state": ["theta", "omega", "tau_operator"],
  "robot/ref": ["v_ref", "p_ref"],
  "robot/state": ["p", "v", "f_contact"],
  "bridge/diag": [],
};

/** Parse one NDJSON line; null for anything malformed (never throws). */
export function parseBusMessage(line: string): BusMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    return null;
  }
  if (!isRecord(obj)) return null;
  const { topic, t, body } = obj as { topic?: unknown; t?: unknown; body?: unknown };
  if (typeof topic !== "string" || typeof t !== "number" || !Number.isFinite(t)) return null;
  if (!isRecord(body)) return null;
  const required = REQUIRED[topic];
  if (required !== undefined && !finiteNumbers(body, required)) return null;
  return { topic, t, body };
}

// Outbound commands. tau rides at the top level, not in a body.

export function torqueMessage(tau: number): string {
  return JSON.stringify({ topic: "operator/torque", tau });
}

export function paramsMessage(fields: Record<string, number>): string {
  return JSON.stringify({ topic: "operator/params", ...fields });
}
