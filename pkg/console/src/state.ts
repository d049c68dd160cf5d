// Single source of truth for everything the console displays. All updates
// arrive through the message/command event queue, so plain fields are safe.

import { GESTURES, GestureName, PoseMessage, ProtocolError, decodePoseMessage } from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "reconnecting" | "closed";

export const HISTORY_LIMIT = 100;

export class ConsoleState {
  status: ConnectionStatus = "connecting";
  latest: PoseMessage | null = null;
  /** Gesture of each displayed message, most recent last, capped at 100. */
  readonly history: GestureName[] = [];
  /** Raw receive_time - timestamp_us for the latest message (microseconds).
   *  The clocks are not synchronized, hence the skew disclaimer in the UI. */
  latencyUs: number | null = null;
  /** Smallest latency seen so far; subtracting it removes constant skew. */
  minLatencyUs: number | null = null;
  driving: GestureName | null = null;
  errorBanner: string | null = null;

  received = 0;
  decodeErrors = 0;
  staleDropped = 0;
  drivenMessages = 0;

  private readonly tallyCounts: number[][] = GESTURES.map(() => GESTURES.map(() => 0));

  /** Feed one NDJSON line; returns the message if it became the displayed one. */
  onLine(line: string, receiveTimeUs: number): PoseMessage | null {
    let message: PoseMessage;
    try {
      message = decodePoseMessage(line);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.decodeErrors += 1;
        this.errorBanner = err.message;
        return null; // the stream keeps going; the banner shows what happened
      }
      throw err;
    }
    if (this.latest !== null && message.seq <= this.latest.seq) {
      this.staleDropped += 1; // displayed seq stays strictly increasing
      return null;
    }
    this.latest = message;
    this.received += 1;
    this.history.push(message.gesture);
    if (this.history.length > HISTORY_LIMIT) {
      this.history.shift();
    }
    this.latencyUs = receiveTimeUs - message.timestamp_us;
    if (this.minLatencyUs === null || this.latencyUs < this.minLatencyUs) {
      this.minLatencyUs = this.latencyUs;
    }
    if (this.driving !== null) {
      this.tallyCounts[GESTURES.indexOf(this.driving)][GESTURES.indexOf(message.gesture)] += 1;
      this.drivenMessages += 1;
    }
    return message;
  }

  onStatus(status: ConnectionStatus): void {
    this.status = status;
  }

  setDriving(gesture: GestureName | null): void {
    this.driving = gesture;
  }

  clearError(): void {
    this.errorBanner = null;
  }

  displayedGesture(): GestureName | null {
    return this.latest === null ? null : this.latest.gesture;
  }

  /** Skew-adjusted latency for the readout: latest minus the rolling floor. */
  jitterUs(): number | null {
    if (this.latencyUs === null || this.minLatencyUs === null) {
      return null;
    }
    return this.latencyUs - this.minLatencyUs;
  }

  tally(driven: GestureName, predicted: GestureName): number {
    return this.tallyCounts[GESTURES.indexOf(driven)][GESTURES.indexOf(predicted)];
  }

  tallyTable(): number[][] {
    return this.tallyCounts.map((row) => row.slice());
  }

  tallyTotal(): number {
    return this.tallyCounts.reduce((sum, row) => sum + row.reduce((s, v) => s + v, 0), 0);
  }
}
