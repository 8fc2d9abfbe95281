// Deterministic time for rate/timeout tests and a scripted WebSocket
// double for link tests. No real timers anywhere.

import { WsLike } from "../src/link.js";

interface Timer {
  at: number;
  fn: () => void;
}

export class ManualTime {
  t = 0;
  private timers: Timer[] = [];

  now = (): number => this.t;

  schedule = (fn: () => void, ms: number): unknown => {
    const timer: Timer = { at: this.t + ms, fn };
    this.timers.push(timer);
    return timer;
  };

  cancel = (handle: unknown): void => {
    this.timers = this.timers.filter((x) => x !== handle);
  };

  /** Move time forward, firing due timers in order. */
  advance(ms: number): void {
    const target = this.t + ms;
    for (;;) {
      const due = this.timers.filter((x) => x.at <= target).sort((a, b) => a.at - b.at)[0];
      if (due === undefined) break;
      this.timers = this.timers.filter((x) => x !== due);
      this.t = due.at;
      due.fn();
    }
    this.t = target;
  }
}

export class FakeSocket implements WsLike {
  sent: string[] = [];
  closed = false;
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  // test-side controls
  open(): void {
    this.onopen?.();
  }

  push(line: string): void {
    this.onmessage?.({ data: line });
  }

  drop(): void {
    this.onclose?.();
  }
}

export function busLine(topic: string, t: number, body: Record<string, unknown>): string {
  return JSON.stringify({ topic, t, body });
}
