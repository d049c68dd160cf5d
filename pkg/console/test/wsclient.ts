// Minimal node-side WebSocket client for exercising the console against the
// real pipeline. Raw sockets on purpose: the stalled-tab test needs to stop
// reading at the TCP level, which packaged clients do not expose.

import crypto from "node:crypto";
import net from "node:net";

const WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

function acceptKeyFor(key: string): string {
  return crypto.createHash("sha1").update(key + WS_GUID).digest("base64");
}

function maskedTextFrame(text: string): Buffer {
  const payload = Buffer.from(text, "utf8");
  const mask = crypto.randomBytes(4);
  const masked = Buffer.from(payload);
  for (let i = 0; i < masked.length; i++) {
    masked[i] ^= mask[i % 4];
  }
  let header: Buffer;
  if (payload.length < 126) {
    header = Buffer.from([0x81, 0x80 | payload.length]);
  } else if (payload.length < 65536) {
    header = Buffer.alloc(4);
    header[0] = 0x81;
    header[1] = 0x80 | 126;
    header.writeUInt16BE(payload.length, 2);
  } else {
    header = Buffer.alloc(10);
    header[0] = 0x81;
    header[1] = 0x80 | 127;
    header.writeBigUInt64BE(BigInt(payload.length), 2);
  }
  return Buffer.concat([header, mask, masked]);
}

interface Waiter {
  resolve: (text: string) => void;
  reject: (err: Error) => void;
  timer: NodeJS.Timeout;
}

export class RawWsClient {
  onText: ((text: string) => void) | null = null;
  onClose: (() => void) | null = null;

  private buffer = Buffer.alloc(0);
  private readonly queued: string[] = [];
  private readonly waiters: Waiter[] = [];
  private closedErr: Error | null = null;

  private constructor(private readonly socket: net.Socket) {
    socket.on("data", (chunk) => this.onData(chunk));
    socket.on("error", (err) => this.fail(err));
    socket.on("close", () => this.fail(new Error("socket closed")));
  }

  static connect(port: number, host = "127.0.0.1", timeoutMs = 10_000): Promise<RawWsClient> {
    return new Promise((resolve, reject) => {
      const socket = net.connect(port, host);
      const key = crypto.randomBytes(16).toString("base64");
      const timer = setTimeout(() => {
        socket.destroy();
        reject(new Error("websocket handshake timed out"));
      }, timeoutMs);
      let header = Buffer.alloc(0);
      const onHandshakeData = (chunk: Buffer): void => {
        header = Buffer.concat([header, chunk]);
        const end = header.indexOf("\r\n\r\n");
        if (end < 0) {
          return;
        }
        clearTimeout(timer);
        socket.removeListener("data", onHandshakeData);
        const head = header.subarray(0, end).toString("latin1");
        if (!head.startsWith("HTTP/1.1 101") || !head.includes(acceptKeyFor(key))) {
          socket.destroy();
          reject(new Error(`bad websocket handshake: ${head.split("\r\n")[0]}`));
          return;
        }
        const client = new RawWsClient(socket);
        const leftover = header.subarray(end + 4);
        if (leftover.length > 0) {
          client.onData(leftover);
        }
        resolve(client);
      };
      socket.on("data", onHandshakeData);
      socket.once("error", (err) => {
        clearTimeout(timer);
        reject(err);
      });
      socket.on("connect", () => {
        socket.write(
          `GET / HTTP/1.1\r\nHost: ${host}:${port}\r\nUpgrade: websocket\r\n` +
            `Connection: Upgrade\r\nSec-WebSocket-Key: ${key}\r\nSec-WebSocket-Version: 13\r\n\r\n`,
        );
      });
    });
  }

  private onData(chunk: Buffer): void {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    while (true) {
      if (this.buffer.length < 2) {
        return;
      }
      const opcode = this.buffer[0] & 0x0f;
      let length = this.buffer[1] & 0x7f; // server frames are unmasked
      let offset = 2;
      if (length === 126) {
        if (this.buffer.length < 4) {
          return;
        }
        length = this.buffer.readUInt16BE(2);
        offset = 4;
      } else if (length === 127) {
        if (this.buffer.length < 10) {
          return;
        }
        length = Number(this.buffer.readBigUInt64BE(2));
        offset = 10;
      }
      if (this.buffer.length < offset + length) {
        return;
      }
      const payload = this.buffer.subarray(offset, offset + length);
      this.buffer = this.buffer.subarray(offset + length);
      if (opcode === 0x1) {
        this.deliver(payload.toString("utf8"));
      } else if (opcode === 0x9) {
        this.socket.write(Buffer.concat([Buffer.from([0x8a, 0x80]), crypto.randomBytes(4)]));
      } else if (opcode === 0x8) {
        this.socket.destroy();
        return;
      }
    }
  }

  private deliver(text: string): void {
    if (this.onText !== null) {
      this.onText(text);
      return;
    }
    const waiter = this.waiters.shift();
    if (waiter !== undefined) {
      clearTimeout(waiter.timer);
      waiter.resolve(text);
    } else {
      this.queued.push(text);
    }
  }

  private fail(err: Error): void {
    if (this.closedErr !== null) {
      return;
    }
    this.closedErr = err;
    for (const waiter of this.waiters.splice(0)) {
      clearTimeout(waiter.timer);
      waiter.reject(err);
    }
    this.onClose?.();
  }

  nextMessage(timeoutMs = 10_000): Promise<string> {
    const queuedText = this.queued.shift();
    if (queuedText !== undefined) {
      return Promise.resolve(queuedText);
    }
    if (this.closedErr !== null) {
      return Promise.reject(this.closedErr);
    }
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        const i = this.waiters.findIndex((w) => w.timer === timer);
        if (i >= 0) {
          this.waiters.splice(i, 1);
        }
        reject(new Error("timed out waiting for a websocket message"));
      }, timeoutMs);
      this.waiters.push({ resolve, reject, timer });
    });
  }

  send(text: string): void {
    this.socket.write(maskedTextFrame(text));
  }

  /** Stop reading at the TCP level — exactly what a wedged browser tab does. */
  pause(): void {
    this.socket.pause();
  }

  resume(): void {
    this.socket.resume();
  }

  close(): void {
    this.closedErr = this.closedErr ?? new Error("closed locally");
    this.socket.destroy();
  }
}
