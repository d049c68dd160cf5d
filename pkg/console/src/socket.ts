// Telemetry subscription over the browser socket with automatic reconnect.
// The WebSocket implementation is injectable so tests can run under node.

import { nowUs } from "./protocol.js";
import { ConnectionStatus } from "./state.js";

/** The slice of the WebSocket API the console relies on. */
export interface SocketLike {
  onopen: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface TelemetryHandlers {
  onLine(line: string, receiveTimeUs: number): void;
  onStatus?(status: ConnectionStatus): void;
}

export interface TelemetryOptions {
  socketFactory?: SocketFactory;
  baseBackoffMs?: number;
  maxBackoffMs?: number;
}

const defaultFactory: SocketFactory = (url) => new WebSocket(url) as unknown as SocketLike;

export class TelemetryClient {
  private ws: SocketLike | null = null;
  private attempts = 0;
  private closed = false;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private readonly factory: SocketFactory;
  private readonly baseBackoffMs: number;
  private readonly maxBackoffMs: number;

  constructor(
    private readonly url: string,
    private readonly handlers: TelemetryHandlers,
    options: TelemetryOptions = {},
  ) {
    this.factory = options.socketFactory ?? defaultFactory;
    this.baseBackoffMs = options.baseBackoffMs ?? 250;
    // A dead server must be rejoined within 5 s, so the backoff caps there.
    this.maxBackoffMs = options.maxBackoffMs ?? 5000;
  }

  connect(): void {
    if (this.closed) {
      return;
    }
    this.status(this.attempts === 0 ? "connecting" : "reconnecting");
    let ws: SocketLike;
    try {
      ws = this.factory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.status("open");
    };
    ws.onmessage = (event) => {
      this.handlers.onLine(String(event.data), nowUs());
    };
    ws.onerror = () => {
      // The close handler follows and owns the reconnect.
    };
    ws.onclose = () => {
      if (this.ws === ws) {
        this.ws = null;
        this.status("closed");
        this.scheduleReconnect();
      }
    };
  }

  private scheduleReconnect(): void {
    if (this.closed || this.timer !== null) {
      return;
    }
    const delay = Math.min(this.baseBackoffMs * 2 ** this.attempts, this.maxBackoffMs);
    this.attempts += 1;
    this.timer = setTimeout(() => {
      this.timer = null;
      this.connect();
    }, delay);
  }

  close(): void {
    this.closed = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    if (this.ws !== null) {
      const ws = this.ws;
      this.ws = null;
      ws.onclose = null;
      ws.close();
    }
    this.status("closed");
  }

  private status(status: ConnectionStatus): void {
    this.handlers.onStatus?.(status);
  }
}
