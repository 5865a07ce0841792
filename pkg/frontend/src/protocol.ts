// Wire frames: one JSON object per websocket text message, matching the
// hub's newline-JSON stream format (the hub strips/adds the newline).

export const FRAME_TYPES = [
  "HELLO", "WELCOME", "TELEMETRY", "ALERT", "MISSION_TRIGGER",
  "MISSION_STATUS", "COMMAND", "DETECTION", "CORR_REQUEST", "CORR_VERDICT",
  "EVENT", "ERROR", "BYE",
] as const;

export type FrameType = (typeof FRAME_TYPES)[number];

export interface Frame {
  v: 1;
  type: FrameType;
  seq: number;
  tick: number;
  src: string;
  dst: string;
  payload: Record<string, unknown>;
}

export class FrameDecodeError extends Error {}

/** Serialize with sorted keys so frames match the hub's canonical form. */
export function encodeFrame(frame: Frame): string {
  return canonicalJson({
    v: frame.v,
    type: frame.type,
    seq: frame.seq,
    tick: frame.tick,
    src: frame.src,
    dst: frame.dst,
    payload: frame.payload,
  });
}

export function canonicalJson(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  const obj = value as Record<string, unknown>;
  const keys = Object.keys(obj).sort();
  return (
    "{" +
    keys.map((k) => JSON.stringify(k) + ":" + canonicalJson(obj[k])).join(",") +
    "}"
  );
}

export function decodeFrame(raw: string): Frame {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch (e) {
    throw new FrameDecodeError(`not JSON: ${e}`);
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    throw new FrameDecodeError("frame is not an object");
  }
  const rec = data as Record<string, unknown>;
  if (rec.v !== 1) throw new FrameDecodeError(`unsupported version ${rec.v}`);
  if (!FRAME_TYPES.includes(rec.type as FrameType)) {
    throw new FrameDecodeError(`unknown frame type ${rec.type}`);
  }
  if (typeof rec.seq !== "number" || rec.seq < 1) {
    throw new FrameDecodeError("seq starts at 1");
  }
  if (typeof rec.tick !== "number" || typeof rec.src !== "string" ||
      typeof rec.dst !== "string") {
    throw new FrameDecodeError("missing frame fields");
  }
  return {
    v: 1,
    type: rec.type as FrameType,
    seq: rec.seq,
    tick: rec.tick,
    src: rec.src,
    dst: rec.dst,
    payload: (rec.payload ?? {}) as Record<string, unknown>,
  };
}
