/** Client-side forward kinematics over the `/model` description.
 *
 * The console never solves IK and never predicts — it draws exactly what the
 * server reports — but it does need FK to turn reported joint values into a
 * skeleton on screen.  The chain walk mirrors the server: each link is a
 * fixed transform from the previous joint frame followed by a revolute joint
 * about a unit axis in the post-transform frame, and the end effector hangs
 * off the last joint through one more fixed offset.
 */

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number]; // w, x, y, z
/** Row-major 3x3 rotation matrix. */
export type Mat3 = [
  number, number, number,
  number, number, number,
  number, number, number,
];

export interface ModelLink {
  translation: Vec3;
  rotation_wxyz: Quat;
  axis: Vec3;
  limit: [number, number];
  velocity_limit: number;
}

export interface ModelDoc {
  name: string;
  model_version: number;
  dof: number;
  home: number[];
  euler_convention: string;
  links: ModelLink[];
  ee_offset: { translation: Vec3; rotation_wxyz: Quat };
  effector: { kind: string; channels: number; rate: number };
}

export interface FkResult {
  /** World position of each joint origin, then the end effector, in order. */
  points: Vec3[];
  eePosition: Vec3;
  eeOrientation: Quat;
}

// ---- small rotation algebra ----

export const IDENTITY: Mat3 = [1, 0, 0, 0, 1, 0, 0, 0, 1];

export function quatToMatrix(q: Quat): Mat3 {
  const [w, x, y, z] = q;
  return [
    1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
    2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
    2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y),
  ];
}

/** Largest-pivot branch extraction, canonicalized to w >= 0. */
export function matrixToQuat(m: Mat3): Quat {
  const t = m[0] + m[4] + m[8];
  let w: number, x: number, y: number, z: number;
  if (t > 0) {
    const s = Math.sqrt(t + 1) * 2;
    w = 0.25 * s;
    x = (m[7] - m[5]) / s;
    y = (m[2] - m[6]) / s;
    z = (m[3] - m[1]) / s;
  } else if (m[0] >= m[4] && m[0] >= m[8]) {
    const s = Math.sqrt(1 + m[0] - m[4] - m[8]) * 2;
    w = (m[7] - m[5]) / s;
    x = 0.25 * s;
    y = (m[1] + m[3]) / s;
    z = (m[2] + m[6]) / s;
  } else if (m[4] >= m[8]) {
    const s = Math.sqrt(1 + m[4] - m[0] - m[8]) * 2;
    w = (m[2] - m[6]) / s;
    x = (m[1] + m[3]) / s;
    y = 0.25 * s;
    z = (m[5] + m[7]) / s;
  } else {
    const s = Math.sqrt(1 + m[8] - m[0] - m[4]) * 2;
    w = (m[3] - m[1]) / s;
    x = (m[2] + m[6]) / s;
    y = (m[5] + m[7]) / s;
    z = 0.25 * s;
  }
  return w < 0 ? [-w, -x, -y, -z] : [w, x, y, z];
}

export function matMul(a: Mat3, b: Mat3): Mat3 {
  const out = new Array(9) as Mat3;
  for (let r = 0; r < 3; r++) {
    for (let c = 0; c < 3; c++) {
      out[r * 3 + c] =
        a[r * 3]! * b[c]! + a[r * 3 + 1]! * b[3 + c]! + a[r * 3 + 2]! * b[6 + c]!;
    }
  }
  return out;
}

export function matVec(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
    m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
    m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
  ];
}

/** Rodrigues rotation about a unit axis. */
export function axisRotation(axis: Vec3, angle: number): Mat3 {
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const [x, y, z] = axis;
  const oc = 1 - c;
  return [
    c + x * x * oc, x * y * oc - z * s, x * z * oc + y * s,
    y * x * oc + z * s, c + y * y * oc, y * z * oc - x * s,
    z * x * oc - y * s, z * y * oc + x * s, c + z * z * oc,
  ];
}

// ---- chain walk ----

/** Precomputed fixed transforms so the render loop stays allocation-light. */
export class Chain {
  readonly dof: number;
  private readonly fixedR: Mat3[];
  private readonly fixedT: Vec3[];
  private readonly axes: Vec3[];
  private readonly eeR: Mat3;
  private readonly eeT: Vec3;
  readonly limits: [number, number][];

  constructor(model: ModelDoc) {
    this.dof = model.links.length;
    this.fixedR = model.links.map((link) => quatToMatrix(link.rotation_wxyz));
    this.fixedT = model.links.map((link) => link.translation);
    this.axes = model.links.map((link) => link.axis);
    this.eeR = quatToMatrix(model.ee_offset.rotation_wxyz);
    this.eeT = model.ee_offset.translation;
    this.limits = model.links.map((link) => link.limit);
  }

  forward(joints: number[]): FkResult {
    if (joints.length !== this.dof) {
      throw new Error(`expected ${this.dof} joint values, got ${joints.length}`);
    }
    let R: Mat3 = IDENTITY;
    let t: Vec3 = [0, 0, 0];
    const points: Vec3[] = [];
    for (let i = 0; i < this.dof; i++) {
      const step = matVec(R, this.fixedT[i]!);
      t = [t[0] + step[0], t[1] + step[1], t[2] + step[2]];
      R = matMul(R, this.fixedR[i]!);
      points.push(t);
      R = matMul(R, axisRotation(this.axes[i]!, joints[i]!));
    }
    const tail = matVec(R, this.eeT);
    t = [t[0] + tail[0], t[1] + tail[1], t[2] + tail[2]];
    R = matMul(R, this.eeR);
    points.push(t);
    return { points, eePosition: t, eeOrientation: matrixToQuat(R) };
  }
}
