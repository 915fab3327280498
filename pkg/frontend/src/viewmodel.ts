/** Console state machine: server reports in, device commands out.
 *
 * The view model renders exactly what the server said — there is no
 * client-side prediction.  Scaling factors come from `/config` and are
 * read-only here; the only local state is the stylus pose the operator is
 * commanding, the latest `StateUpdate`, and bookkeeping for the HUD (trail,
 * error notes, the Local-engage anchor used to display the commanded
 * offset).
 */

import { Quat, Vec3 } from "./kinematics.js";
import { Payload, StateUpdate, decode, encode } from "./protocol.js";
import { Transport } from "./transport.js";

export interface ConsoleConfig {
  session: string;
  arm: string;
  decoupling: string;
  alpha_l: number;
  alpha_r: number;
  dt: number;
  mirror_velocity_limit: number;
  model: string;
}

export type ConnectionState = "connecting" | "up" | "lost";

export interface ErrorNote {
  code: string;
  text: string;
  at: number;
}

export interface LocalAnchor {
  ee: Vec3;
  stylus: Vec3;
}

const TRAIL_CAP = 512;
const ERROR_CAP = 25;

export class ConsoleViewModel {
  connection: ConnectionState = "connecting";
  state: StateUpdate | null = null;
  stylus: Vec3 = [0, 0, 0];
  stylusOrientation: Quat = [1, 0, 0, 0];
  grip = 0;
  trail: Vec3[] = [];
  errors: ErrorNote[] = [];
  /** Set when the server reports Local mode; cleared when it leaves. */
  localAnchor: LocalAnchor | null = null;

  private transport: Transport | null = null;
  private seq = 0;
  private sentStylus = false;
  private pendingAnchorStylus: Vec3 | null = null;

  constructor(
    readonly config: ConsoleConfig,
    private readonly clock: () => number = () => Date.now(),
  ) {}

  // ---- connection lifecycle ----

  attach(transport: Transport): void {
    // A fresh connection is a fresh sender to the session: sequence numbers
    // and the stylus-seen flag start over.
    this.transport = transport;
    this.seq = 0;
    this.sentStylus = false;
    this.connection = "up";
  }

  detach(): void {
    this.transport = null;
    this.connection = "lost";
  }

  // ---- inbound ----

  handleFrame(frame: Uint8Array): void {
    let payload: Payload;
    try {
      payload = decode(frame).payload;
    } catch (exc) {
      this.note("client-decode", String(exc));
      return;
    }
    if (payload.kind === "StateUpdate") {
      const previous = this.state;
      this.state = payload;
      this.trail.push(payload.ee_position);
      if (this.trail.length > TRAIL_CAP) {
        this.trail.shift();
      }
      if (payload.mode === "local" && previous?.mode !== "local") {
        this.localAnchor = {
          ee: payload.ee_position,
          stylus: this.pendingAnchorStylus ?? [...this.stylus],
        };
        this.pendingAnchorStylus = null;
      } else if (payload.mode !== "local") {
        this.localAnchor = null;
      }
    } else if (payload.kind === "Error") {
      this.note(payload.code, payload.text);
    }
  }

  private note(code: string, text: string): void {
    this.errors.push({ code, text, at: this.clock() });
    if (this.errors.length > ERROR_CAP) {
      this.errors.shift();
    }
  }

  // ---- outbound ----

  private post(payload: Payload): boolean {
    if (this.transport === null) {
      return false;
    }
    this.seq += 1;
    this.transport.send(
      encode({
        session: this.config.session,
        arm: this.config.arm,
        seq: this.seq,
        t_us: Math.max(0, Math.round(this.clock() * 1000)),
        payload,
      }),
    );
    return true;
  }

  heartbeat(): void {
    this.post({ kind: "Heartbeat" });
  }

  /** Move the stylus by a world-frame delta (meters) and stream the pose. */
  moveStylus(dx: number, dy: number, dz: number): void {
    this.stylus = [this.stylus[0] + dx, this.stylus[1] + dy, this.stylus[2] + dz];
    this.sendStylus();
  }

  private sendStylus(): void {
    if (
      this.post({
        kind: "CartesianCommand",
        position: [...this.stylus],
        orientation_wxyz: [...this.stylusOrientation],
      })
    ) {
      this.sentStylus = true;
    }
  }

  /** Pedal press: request the opposite temporal mode. */
  pedal(): void {
    const mode = this.state?.mode ?? "global";
    if (mode === "global") {
      if (!this.sentStylus) {
        this.sendStylus(); // Local cannot engage before a stylus reading
      }
      this.pendingAnchorStylus = [...this.stylus];
      this.post({ kind: "ModeSwitch", mode: "local" });
    } else {
      this.post({ kind: "ModeSwitch", mode: "global" });
    }
  }

  setGrip(value: number): void {
    this.grip = Math.min(1, Math.max(0, value));
    this.post({ kind: "GripperCommand", value: this.grip });
  }

  estop(reason: string): void {
    this.post({ kind: "Estop", reason });
  }

  resetArm(): void {
    this.post({ kind: "Reset" });
    this.trail = [];
  }

  // ---- derived, for the HUD ----

  /** Commanded EE offset while Local: alpha_l * (stylus - anchor stylus). */
  commandedOffset(): Vec3 | null {
    if (this.localAnchor === null) {
      return null;
    }
    const a = this.config.alpha_l;
    const s = this.stylus;
    const s0 = this.localAnchor.stylus;
    return [a * (s[0] - s0[0]), a * (s[1] - s0[1]), a * (s[2] - s0[2])];
  }

  /** EE displacement the server has reported since Local engaged. */
  reportedOffset(): Vec3 | null {
    if (this.localAnchor === null || this.state === null) {
      return null;
    }
    const e = this.state.ee_position;
    const e0 = this.localAnchor.ee;
    return [e[0] - e0[0], e[1] - e0[1], e[2] - e0[2]];
  }
}
