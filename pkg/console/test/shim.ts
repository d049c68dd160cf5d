// Adapts RawWsClient to the browser WebSocket surface the console classes
// expect, so TelemetryClient and CommandClient run unmodified under node.

import { SocketFactory, SocketLike } from "../src/socket.js";
import { RawWsClient } from "./wsclient.js";

class NodeWsShim implements SocketLike {
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: unknown }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;

  private client: RawWsClient | null = null;
  private closed = false;

  constructor(url: string) {
    const parsed = new URL(url);
    RawWsClient.connect(Number(parsed.port), parsed.hostname)
      .then((client) => {
        if (this.closed) {
          client.close();
          return;
        }
        this.client = client;
        client.onText = (text) => this.onmessage?.({ data: text });
        client.onClose = () => this.onclose?.();
        this.onopen?.();
      })
      .catch(() => {
        this.onerror?.();
        this.onclose?.();
      });
  }

  send(data: string): void {
    this.client?.send(data);
  }

  close(): void {
    this.closed = true;
    this.client?.close();
  }
}

export const nodeSocketFactory: SocketFactory = (url) => new NodeWsShim(url);
