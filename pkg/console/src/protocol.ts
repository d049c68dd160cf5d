// Wire protocol for the pose telemetry stream (see docs/wire/protocol.md).
// Each message is one JSON object per line; the decoder is strict so a
// misbehaving producer surfaces as a visible error instead of a silent glitch.

export const GESTURES = ["rest", "power_grip", "wrist_pronation", "point"] as const;
export type GestureName = (typeof GESTURES)[number];

export const JOINT_NAMES = [
  "thumb_abduction",
  "thumb_mcp_flexion",
  "thumb_ip_flexion",
  "index_mcp_flexion",
  "index_pip_flexion",
  "middle_mcp_flexion",
  "middle_pip_flexion",
  "ring_mcp_flexion",
  "ring_pip_flexion",
  "little_mcp_flexion",
  "little_pip_flexion",
  "wrist_pronation",
  "wrist_flexion",
  "base_roll",
] as const;

export const N_JOINTS = JOINT_NAMES.length;

const MESSAGE_KEYS = ["seq", "timestamp_us", "gesture", "confidence", "features", "joints"];

export interface PoseMessage {
  seq: number;
  timestamp_us: number;
  gesture: GestureName;
  confidence: number;
  features: number[];
  joints: number[];
}

export class ProtocolError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ProtocolError";
  }
}

function isGesture(value: string): value is GestureName {
  return (GESTURES as readonly string[]).includes(value);
}

function numberArray(value: unknown, key: string, length: number): number[] {
  if (!Array.isArray(value) || !value.every((v) => typeof v === "number")) {
    throw new ProtocolError(`${key} must be an array of numbers`);
  }
  if (value.length !== length) {
    throw new ProtocolError(`${key} must have length ${length}, got ${value.length}`);
  }
  if (!value.every((v) => Number.isFinite(v))) {
    throw new ProtocolError(`${key} must be finite`);
  }
  return value.slice();
}

/** Decode one NDJSON line into a validated PoseMessage. Throws ProtocolError. */
export function decodePoseMessage(line: string): PoseMessage {
  const text = line.endsWith("\n") ? line.slice(0, -1) : line;
  if (text.includes("\n")) {
    throw new ProtocolError("expected a single newline-terminated message");
  }
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (err) {
    throw new ProtocolError(`malformed JSON: ${err instanceof Error ? err.message : err}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new ProtocolError("message must be a JSON object");
  }
  const record = obj as Record<string, unknown>;
  const keys = Object.keys(record).sort();
  const want = [...MESSAGE_KEYS].sort();
  if (keys.length !== want.length || keys.some((k, i) => k !== want[i])) {
    throw new ProtocolError(`unexpected key set [${keys}], want [${want}]`);
  }
  const { seq, timestamp_us: ts, gesture, confidence } = record;
  if (typeof seq !== "number" || !Number.isInteger(seq) || seq < 0) {
    throw new ProtocolError("seq must be a non-negative integer");
  }
  if (typeof ts !== "number" || !Number.isInteger(ts) || ts < 0) {
    throw new ProtocolError("timestamp_us must be a non-negative integer");
  }
  if (typeof gesture !== "string") {
    throw new ProtocolError("gesture must be a string");
  }
  if (!isGesture(gesture)) {
    throw new ProtocolError(`unknown gesture name: '${gesture}'`);
  }
  const features = numberArray(record.features, "features", 4);
  if (!features.every((v) => Math.abs(v) <= 1.0)) {
    throw new ProtocolError("features must lie in [-1, 1]");
  }
  const joints = numberArray(record.joints, "joints", N_JOINTS);
  if (typeof confidence !== "number" || !Number.isFinite(confidence) || Math.abs(confidence) > 1.0) {
    throw new ProtocolError(`confidence ${confidence} outside [-1, 1]`);
  }
  return { seq, timestamp_us: ts, gesture, confidence, features, joints };
}

/** Microsecond wall-clock time, comparable across a message's lifetime. */
export function nowUs(): number {
  return Math.round((performance.timeOrigin + performance.now()) * 1000);
}
