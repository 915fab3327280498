/** Framed wire protocol, mirroring the glteleop session server.
 *
 * Frame layout: a 4-byte big-endian unsigned body length, then a UTF-8 JSON
 * body:
 *
 *     {"v": 1, "session": "...", "arm": "...", "seq": N, "t_us": N,
 *      "kind": "<payload kind>", "payload": {...}}
 *
 * The identical frames travel over raw TCP and over the websocket gateway
 * (one binary websocket message per frame, prefix included).  Encoding is
 * canonical — sorted keys, no whitespace — and NaN/Infinity are rejected in
 * both directions.  The wire layer checks structure and finiteness only;
 * semantic validation lives server-side.
 */

export const PROTOCOL_VERSION = 1;
export const MAX_FRAME = 1 << 20; // body bytes

export class ProtocolError extends Error {}

// ---- payload types ----

export interface JointCommand {
  kind: "JointCommand";
  joints: number[];
}

export interface CartesianCommand {
  kind: "CartesianCommand";
  position: [number, number, number];
  orientation_wxyz: [number, number, number, number];
}

export interface GripperCommand {
  kind: "GripperCommand";
  value: number;
}

export interface HandCommand {
  kind: "HandCommand";
  channels: number[];
}

export interface ModeSwitch {
  kind: "ModeSwitch";
  mode: "global" | "local";
}

export interface StateUpdate {
  kind: "StateUpdate";
  tick: number;
  sim_time: number;
  joints: number[];
  velocities: number[];
  ee_position: [number, number, number];
  ee_orientation_wxyz: [number, number, number, number];
  effector: number[];
  estopped: boolean;
  estop_reason: string | null;
  safe_hold: boolean;
  mode: "global" | "local" | "spatial";
  pending: boolean;
}

export interface Heartbeat {
  kind: "Heartbeat";
}

export interface Estop {
  kind: "Estop";
  reason: string;
}

export interface Reset {
  kind: "Reset";
}

export interface ErrorReply {
  kind: "Error";
  code: string;
  text: string;
}

export type Payload =
  | JointCommand
  | CartesianCommand
  | GripperCommand
  | HandCommand
  | ModeSwitch
  | StateUpdate
  | Heartbeat
  | Estop
  | Reset
  | ErrorReply;

export interface TeleopMessage {
  session: string;
  arm: string;
  seq: number;
  t_us: number;
  payload: Payload;
}

// ---- field checkers ----

function checkString(value: unknown, label: string, allowEmpty = false): string {
  if (typeof value !== "string" || (!allowEmpty && value === "")) {
    throw new ProtocolError(`${label} must be a non-empty string`);
  }
  return value;
}

function checkInt(value: unknown, label: string): number {
  if (typeof value !== "number" || !Number.isInteger(value) || value < 0) {
    throw new ProtocolError(`${label} must be a non-negative integer`);
  }
  return value;
}

function checkBool(value: unknown, label: string): boolean {
  if (typeof value !== "boolean") {
    throw new ProtocolError(`${label} must be a boolean`);
  }
  return value;
}

function checkFloat(value: unknown, label: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new ProtocolError(`${label} must be a finite number`);
  }
  return value;
}

function checkFloats(value: unknown, label: string, length?: number): number[] {
  if (!Array.isArray(value)) {
    throw new ProtocolError(`${label} must be an array`);
  }
  if (length !== undefined && value.length !== length) {
    throw new ProtocolError(`${label} must have ${length} values, got ${value.length}`);
  }
  return value.map((v, i) => checkFloat(v, `${label}[${i}]`));
}

function checkKeys(doc: Record<string, unknown>, keys: string[], kind: string): void {
  for (const key of keys) {
    if (!(key in doc)) {
      throw new ProtocolError(`${kind}: missing field ${key}`);
    }
  }
  for (const key of Object.keys(doc)) {
    if (!keys.includes(key)) {
      throw new ProtocolError(`${kind}: unexpected field ${key}`);
    }
  }
}

// ---- payload parsing ----

type Doc = Record<string, unknown>;

const PARSERS: Record<string, (doc: Doc) => Payload> = {
  JointCommand: (doc) => {
    checkKeys(doc, ["joints"], "JointCommand");
    const joints = checkFloats(doc.joints, "joints");
    if (joints.length === 0) {
      throw new ProtocolError("joints must be non-empty");
    }
    return { kind: "JointCommand", joints };
  },
  CartesianCommand: (doc) => {
    checkKeys(doc, ["position", "orientation_wxyz"], "CartesianCommand");
    return {
      kind: "CartesianCommand",
      position: checkFloats(doc.position, "position", 3) as [number, number, number],
      orientation_wxyz: checkFloats(doc.orientation_wxyz, "orientation_wxyz", 4) as [
        number, number, number, number,
      ],
    };
  },
  GripperCommand: (doc) => {
    checkKeys(doc, ["value"], "GripperCommand");
    return { kind: "GripperCommand", value: checkFloat(doc.value, "value") };
  },
  HandCommand: (doc) => {
    checkKeys(doc, ["channels"], "HandCommand");
    return { kind: "HandCommand", channels: checkFloats(doc.channels, "channels", 6) };
  },
  ModeSwitch: (doc) => {
    checkKeys(doc, ["mode"], "ModeSwitch");
    const mode = checkString(doc.mode, "mode");
    if (mode !== "global" && mode !== "local") {
      throw new ProtocolError(`mode must be global or local: ${mode}`);
    }
    return { kind: "ModeSwitch", mode };
  },
  StateUpdate: (doc) => {
    checkKeys(
      doc,
      [
        "tick", "sim_time", "joints", "velocities", "ee_position",
        "ee_orientation_wxyz", "effector", "estopped", "estop_reason",
        "safe_hold", "mode", "pending",
      ],
      "StateUpdate",
    );
    const joints = checkFloats(doc.joints, "joints");
    const velocities = checkFloats(doc.velocities, "velocities");
    if (joints.length !== velocities.length) {
      throw new ProtocolError("joints/velocities length mismatch");
    }
    const mode = checkString(doc.mode, "mode");
    if (mode !== "global" && mode !== "local" && mode !== "spatial") {
      throw new ProtocolError(`unknown state mode: ${mode}`);
    }
    return {
      kind: "StateUpdate",
      tick: checkInt(doc.tick, "tick"),
      sim_time: checkFloat(doc.sim_time, "sim_time"),
      joints,
      velocities,
      ee_position: checkFloats(doc.ee_position, "ee_position", 3) as [
        number, number, number,
      ],
      ee_orientation_wxyz: checkFloats(
        doc.ee_orientation_wxyz, "ee_orientation_wxyz", 4,
      ) as [number, number, number, number],
      effector: checkFloats(doc.effector, "effector"),
      estopped: checkBool(doc.estopped, "estopped"),
      estop_reason:
        doc.estop_reason === null
          ? null
          : checkString(doc.estop_reason, "estop_reason", true),
      safe_hold: checkBool(doc.safe_hold, "safe_hold"),
      mode,
      pending: checkBool(doc.pending, "pending"),
    };
  },
  Heartbeat: (doc) => {
    checkKeys(doc, [], "Heartbeat");
    return { kind: "Heartbeat" };
  },
  Estop: (doc) => {
    checkKeys(doc, ["reason"], "Estop");
    return { kind: "Estop", reason: checkString(doc.reason, "reason", true) };
  },
  Reset: (doc) => {
    checkKeys(doc, [], "Reset");
    return { kind: "Reset" };
  },
  Error: (doc) => {
    checkKeys(doc, ["code", "text"], "Error");
    return {
      kind: "Error",
      code: checkString(doc.code, "code"),
      text: checkString(doc.text, "text", true),
    };
  },
};

// ---- canonical JSON ----

/** JSON with sorted keys and no whitespace; rejects non-finite numbers. */
export function canonicalJson(value: unknown): string {
  if (value === null || typeof value === "boolean" || typeof value === "string") {
    return JSON.stringify(value);
  }
  if (typeof value === "number") {
    if (!Number.isFinite(value)) {
      throw new ProtocolError(`non-finite number: ${value}`);
    }
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return `[${value.map(canonicalJson).join(",")}]`;
  }
  if (typeof value === "object") {
    const doc = value as Doc;
    const parts = Object.keys(doc)
      .sort()
      .map((key) => `${JSON.stringify(key)}:${canonicalJson(doc[key])}`);
    return `{${parts.join(",")}}`;
  }
  throw new ProtocolError(`not serializable: ${typeof value}`);
}

// ---- encode / decode ----

export function encode(message: TeleopMessage): Uint8Array<ArrayBuffer> {
  const { kind, ...fields } = message.payload;
  const body = new TextEncoder().encode(
    canonicalJson({
      v: PROTOCOL_VERSION,
      session: message.session,
      arm: message.arm,
      seq: message.seq,
      t_us: message.t_us,
      kind,
      payload: fields,
    }),
  );
  if (body.length > MAX_FRAME) {
    throw new ProtocolError(`encoded body is ${body.length} bytes, max ${MAX_FRAME}`);
  }
  const frame = new Uint8Array(4 + body.length);
  new DataView(frame.buffer).setUint32(0, body.length, false);
  frame.set(body, 4);
  return frame;
}

export function decode(frame: Uint8Array): TeleopMessage {
  if (frame.length < 4) {
    throw new ProtocolError(`truncated frame: ${frame.length} bytes`);
  }
  const length = new DataView(frame.buffer, frame.byteOffset, 4).getUint32(0, false);
  if (length > MAX_FRAME) {
    throw new ProtocolError(`declared body length ${length} exceeds max ${MAX_FRAME}`);
  }
  if (frame.length - 4 !== length) {
    throw new ProtocolError(
      `frame length mismatch: declared ${length}, got ${frame.length - 4}`,
    );
  }
  let text: string;
  try {
    text = new TextDecoder("utf-8", { fatal: true }).decode(frame.subarray(4));
  } catch (exc) {
    throw new ProtocolError(`body is not valid UTF-8: ${exc}`);
  }
  let doc: unknown;
  try {
    // Strict JSON: bare NaN/Infinity are rejected by JSON.parse itself.
    doc = JSON.parse(text);
  } catch (exc) {
    throw new ProtocolError(`body is not valid JSON: ${exc}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new ProtocolError("body is not an object");
  }
  const top = doc as Doc;
  checkKeys(top, ["v", "session", "arm", "seq", "t_us", "kind", "payload"], "message");
  if (top.v !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${top.v}`);
  }
  const kind = checkString(top.kind, "kind");
  const parser = PARSERS[kind];
  if (parser === undefined) {
    throw new ProtocolError(`unknown payload kind ${kind}`);
  }
  const payloadDoc = top.payload;
  if (typeof payloadDoc !== "object" || payloadDoc === null || Array.isArray(payloadDoc)) {
    throw new ProtocolError("payload must be an object");
  }
  return {
    session: checkString(top.session, "session"),
    arm: checkString(top.arm, "arm"),
    seq: checkInt(top.seq, "seq"),
    t_us: checkInt(top.t_us, "t_us"),
    payload: parser(payloadDoc as Doc),
  };
}

// ---- stream reassembly ----

/** Incremental frame reassembly for a byte stream (the raw TCP transport). */
export class FrameReader {
  private buffer = new Uint8Array(0);

  feed(data: Uint8Array): Uint8Array[] {
    const joined = new Uint8Array(this.buffer.length + data.length);
    joined.set(this.buffer, 0);
    joined.set(data, this.buffer.length);
    this.buffer = joined;

    const frames: Uint8Array[] = [];
    while (this.buffer.length >= 4) {
      const view = new DataView(this.buffer.buffer, this.buffer.byteOffset, 4);
      const length = view.getUint32(0, false);
      if (length > MAX_FRAME) {
        throw new ProtocolError(`declared body length ${length} exceeds max ${MAX_FRAME}`);
      }
      if (this.buffer.length - 4 < length) {
        break;
      }
      frames.push(this.buffer.slice(0, 4 + length));
      this.buffer = this.buffer.slice(4 + length);
    }
    return frames;
  }

  get pending(): boolean {
    return this.buffer.length > 0;
  }
}
