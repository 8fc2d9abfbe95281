// Outbound rate limiting. Pointer events arrive at whatever rate the
// browser feels like; the wire sees at most one message per interval,
// latest value wins, and the trailing value is always delivered.

export type Scheduler = (fn: () => void, ms: number) => unknown;
export type Canceller = (handle: unknown) => void;

export class RateLimiter<T> {
  private lastSentAt = -Infinity;
  private pending: T | undefined;
  private hasPending = false;
  private timer: unknown = null;

  constructor(
    private intervalMs: number,
    private sink: (value: T) => void,
    private now: () => number = () => performance.now(),
    private schedule: Scheduler = (fn, ms) => setTimeout(fn, ms),
    private cancel: Canceller = (h) => clearTimeout(h as number),
  ) {}

  offer(value: T): void {
    const t = this.now();
    if (t - this.lastSentAt >= this.intervalMs) {
      this.lastSentAt = t;
      this.sink(value);
      return;
    }
    this.pending = value;
    this.hasPending = true;
    if (this.timer === null) {
      const wait = this.intervalMs - (t - this.lastSentAt);
      this.timer = this.schedule(() => this.fire(), wait);
    }
  }

  private fire(): void {
    this.timer = null;
    if (!this.hasPending) return;
    const value = this.pending as T;
    this.hasPending = false;
    this.pending = undefined;
    this.lastSentAt = this.now();
    this.sink(value);
  }

  dispose(): void {
    if (this.timer !== null) {
      this.cancel(this.timer);
      this.timer = null;
    }
    this.hasPending = false;
    this.pending = undefined;
  }
}

export const TORQUE_FULL_SCALE = 0.6; // N*m at full drag
export const DRAG_FULL_SCALE_PX = 150;

/** Linear drag-to-torque map, clamped at full scale. */
export function torqueFromDrag(dxPx: number, fullScalePx: number = DRAG_FULL_SCALE_PX): number {
  const frac = Math.max(-1, Math.min(1, dxPx / fullScalePx));
  return frac * TORQUE_FULL_SCALE;
}
