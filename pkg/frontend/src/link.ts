// One WebSocket to the bridge, with reconnect. The socket type is
// structural so tests can substitute a scripted double.

export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export interface LinkOptions {
  makeSocket?: (url: string) => WsLike;
  onLine: (line: string) => void;
  onStatus: (connected: boolean) => void;
  reconnectMs?: number;
  schedule?: (fn: () => void, ms: number) => unknown;
}

export class ConsoleLink {
  connected = false;
  sent = 0;

  private ws: WsLike | null = null;
  private closed = false;

  constructor(private url: string, private opts: LinkOptions) {}

  connect(): void {
    const make = this.opts.makeSocket ?? ((url: string) => new WebSocket(url) as unknown as WsLike);
    const ws = make(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.connected = true;
      this.opts.onStatus(true);
    };
    ws.onmessage = (ev) => {
      if (typeof ev.data === "string") this.opts.onLine(ev.data);
    };
    ws.onerror = () => {
      // onclose follows; nothing to do here
    };
    ws.onclose = () => {
      const wasConnected = this.connected;
      this.connected = false;
      this.ws = null;
      if (wasConnected || !this.closed) this.opts.onStatus(false);
      if (!this.closed) {
        const schedule = this.opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
        schedule(() => {
          if (!this.closed) this.connect();
        }, this.opts.reconnectMs ?? 1000);
      }
    };
  }

  /** Send one already-serialized line; silently dropped while offline. */
  send(line: string): boolean {
    if (!this.connected || this.ws === null) return false;
    this.ws.send(line);
    this.sent += 1;
    return true;
  }

  close(): void {
    this.closed = true;
    if (this.ws !== null) this.ws.close();
  }
}
