// Command channel: drives the pipeline's synthetic gesture source.
// One lightweight socket, one JSON request per command, FIFO replies.

import { GestureName } from "./protocol.js";
import { SocketFactory, SocketLike } from "./socket.js";

export interface CommandReply {
  ok: boolean;
  gesture?: string;
  error?: string;
}

interface Pending {
  resolve: (reply: CommandReply) => void;
  reject: (err: Error) => void;
}

const defaultFactory: SocketFactory = (url) => new WebSocket(url) as unknown as SocketLike;

export class CommandClient {
  /** False when the endpoint is absent; the UI disables the drive controls. */
  enabled = false;
  disabledReason: string | null = null;

  private ws: SocketLike | null = null;
  private readonly pending: Pending[] = [];
  private readonly factory: SocketFactory;

  constructor(
    private readonly url: string,
    options: { socketFactory?: SocketFactory } = {},
  ) {
    this.factory = options.socketFactory ?? defaultFactory;
  }

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      let ws: SocketLike;
      try {
        ws = this.factory(this.url);
      } catch (err) {
        this.disable(`command endpoint unreachable: ${err}`);
        reject(new Error(this.disabledReason ?? "unreachable"));
        return;
      }
      this.ws = ws;
      let settled = false;
      ws.onopen = () => {
        settled = true;
        this.enabled = true;
        this.disabledReason = null;
        resolve();
      };
      ws.onmessage = (event) => {
        const next = this.pending.shift();
        if (next === undefined) {
          return;
        }
        try {
          next.resolve(JSON.parse(String(event.data)) as CommandReply);
        } catch (err) {
          next.reject(err instanceof Error ? err : new Error(String(err)));
        }
      };
      ws.onerror = () => {
        // The close handler follows and reports the failure.
      };
      ws.onclose = () => {
        this.ws = null;
        this.disable("command endpoint closed (start the pipeline with --allow-commands)");
        if (!settled) {
          settled = true;
          reject(new Error(this.disabledReason ?? "closed"));
        }
      };
    });
  }

  driveGesture(gesture: GestureName): Promise<CommandReply> {
    if (this.ws === null || !this.enabled) {
      return Promise.reject(new Error(this.disabledReason ?? "command channel not connected"));
    }
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.ws!.send(JSON.stringify({ cmd: "set_gesture", gesture }));
    });
  }

  close(): void {
    if (this.ws !== null) {
      const ws = this.ws;
      this.ws = null;
      ws.onclose = null;
      ws.close();
    }
    this.disable("command channel closed");
  }

  private disable(reason: string): void {
    this.enabled = false;
    this.disabledReason = reason;
    for (const waiter of this.pending.splice(0)) {
      waiter.reject(new Error(reason));
    }
  }
}
