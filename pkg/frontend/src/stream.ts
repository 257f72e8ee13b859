// WebSocket stream with automatic reconnect and exponential backoff.
// Events are delivered in arrival order; connection status drives staleness.

import type { StreamEvent } from "./types.js";

export class GatewayStream {
  private ws: WebSocket | null = null;
  private attempts = 0;
  private closed = false;

  constructor(
    private url: string,
    private onEvent: (event: StreamEvent) => void,
    private onStatus: (connected: boolean) => void
  ) {}

  start(): void {
    this.closed = false;
    this.connect();
  }

  stop(): void {
    this.closed = true;
    this.ws?.close();
    this.ws = null;
  }

  private connect(): void {
    if (this.closed) return;
    const ws = new WebSocket(this.url);
    this.ws = ws;

    ws.onopen = () => {
      this.attempts = 0;
      this.onStatus(true);
    };

    ws.onmessage = (msg) => {
      try {
        this.onEvent(JSON.parse(msg.data as string) as StreamEvent);
      } catch {
        // a malformed frame must not kill the stream
      }
    };

    ws.onclose = () => {
      this.onStatus(false);
      this.scheduleReconnect();
    };

    ws.onerror = () => {
      ws.close();
    };
  }

  private scheduleReconnect(): void {
    if (this.closed) return;
    const delay = Math.min(500 * 2 ** this.attempts, 15000);
    this.attempts += 1;
    setTimeout(() => this.connect(), delay);
  }
}
