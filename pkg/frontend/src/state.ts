// ConsoleState: the latest message per topic plus a bounded history for
// the strip charts. The render loop reads snapshots; it never computes
// physics. Incoming lines queue in a coalescing buffer and are drained
// once per animation frame, so a telemetry burst costs one redraw.

import {
  BridgeDiagBody,
  BusMessage,
  JoystickBody,
  RobotRefBody,
  RobotStateBody,
  parseBusMessage,
} from "./schema.js";

export const STALE_AFTER_MS = 500;
export const HISTORY_LIMIT = 900;

export interface HistorySample {
  t: number; // bus time, s
  p: number | null;
  p_ref: number | null;
  v_ref: number | null;
  f_contact: number | null;
}

export class ConsoleState {
  joystick: JoystickBody | null = null;
  ref: RobotRefBody | null = null;
  robot: RobotStateBody | null = null;
  diag: BridgeDiagBody | null = null;
  history: HistorySample[] = [];
  connected = false;
  lastRxMs = -Infinity;
  dropped = 0; // unparseable lines

  /** Called with config_ack events pulled off bridge/diag. */
  onConfigAck: ((ok: boolean) => void) | null = null;

  private pending: string[] = [];

  enqueue(line: string): void {
    this.pending.push(line);
  }

  /** Apply everything queued since the last frame. */
  drain(nowMs: number): void {
    const lines = this.pending;
    this.pending = [];
    for (const line of lines) {
      const msg = parseBusMessage(line);
      if (msg === null) {
        this.dropped += 1;
        continue;
      }
      this.apply(msg, nowMs);
    }
  }

  apply(msg: BusMessage, nowMs: number): void {
    this.lastRxMs = nowMs;
    switch (msg.topic) {
      case "joystick/state":
        this.joystick = msg.body as unknown as JoystickBody;
        break;
      case "robot/ref":
        this.ref = msg.body as unknown as RobotRefBody;
        this.pushHistory(msg.t);
        break;
      case "robot/state":
        this.robot = msg.body as unknown as RobotStateBody;
        this.pushHistory(msg.t);
        break;
      case "bridge/diag": {
        const body = msg.body as BridgeDiagBody;
        if (body.event === "config_ack" && this.onConfigAck) {
          this.onConfigAck(body.ok === true);
        } else if (body.event === undefined) {
          this.diag = body; // periodic counters only
        }
        break;
      }
      default:
        break; // unknown topics are fine; schema may grow
    }
  }

  private pushHistory(t: number): void {
    this.history.push({
      t,
      p: this.robot ? this.robot.p : null,
      p_ref: this.ref ? this.ref.p_ref : null,
      v_ref: this.ref ? this.ref.v_ref : null,
      f_contact: this.robot ? this.robot.f_contact : null,
    });
    if (this.history.length > HISTORY_LIMIT) {
      this.history.splice(0, this.history.length - HISTORY_LIMIT);
    }
  }

  /** No message for 500 ms means the numbers on screen are old news. */
  isStale(nowMs: number): boolean {
    return nowMs - this.lastRxMs > STALE_AFTER_MS;
  }
}
