/** Canvas painting for the console: side and top orthographic views.
 *
 * Everything drawn comes from the last `StateUpdate` (skeleton, trail,
 * effector) or from the operator's own input (the stylus crosshair) — the
 * console never extrapolates robot motion.
 */

import { Chain, Vec3 } from "./kinematics.js";
import { ConsoleViewModel } from "./viewmodel.js";

export type ViewAxes = "xz" | "xy";

export interface Viewport {
  width: number;
  height: number;
}

/** Orthographic world-to-pixel projection, y-up flipped to screen space. */
export function project(
  p: Vec3,
  axes: ViewAxes,
  viewport: Viewport,
  metersAcross: number,
  center: [number, number],
): [number, number] {
  const scale = Math.min(viewport.width, viewport.height) / metersAcross;
  const u = p[0];
  const v = axes === "xz" ? p[2] : p[1];
  return [
    viewport.width / 2 + (u - center[0]) * scale,
    viewport.height / 2 - (v - center[1]) * scale,
  ];
}

export interface ViewStyle {
  axes: ViewAxes;
  metersAcross: number;
  center: [number, number];
  label: string;
}

export const SIDE_VIEW: ViewStyle = {
  axes: "xz", metersAcross: 2.2, center: [0, 0.55], label: "side (x-z)",
};
export const TOP_VIEW: ViewStyle = {
  axes: "xy", metersAcross: 2.2, center: [0, 0], label: "top (x-y)",
};

const COLORS = {
  background: "#14171c",
  grid: "#262c35",
  trail: "#3f7d5a",
  arm: "#7aa2d8",
  joint: "#dce3ec",
  ee: "#ff6188",
  stylus: "#e6b450",
  label: "#8a93a2",
  safeHold: "#e6b450",
  estop: "#ff6188",
};

export function renderView(
  ctx: CanvasRenderingContext2D,
  view: ViewStyle,
  chain: Chain,
  vm: ConsoleViewModel,
): void {
  const viewport = { width: ctx.canvas.width, height: ctx.canvas.height };
  const at = (p: Vec3) => project(p, view.axes, viewport, view.metersAcross, view.center);

  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, viewport.width, viewport.height);

  // Axis cross through the world origin.
  ctx.strokeStyle = COLORS.grid;
  ctx.lineWidth = 1;
  const origin = at([0, 0, 0]);
  ctx.beginPath();
  ctx.moveTo(0, origin[1]);
  ctx.lineTo(viewport.width, origin[1]);
  ctx.moveTo(origin[0], 0);
  ctx.lineTo(origin[0], viewport.height);
  ctx.stroke();

  ctx.fillStyle = COLORS.label;
  ctx.font = "12px system-ui, sans-serif";
  ctx.fillText(view.label, 8, 16);

  const state = vm.state;
  if (state !== null) {
    // EE trail, oldest first.
    if (vm.trail.length > 1) {
      ctx.strokeStyle = COLORS.trail;
      ctx.lineWidth = 1;
      ctx.beginPath();
      const start = at(vm.trail[0]!);
      ctx.moveTo(start[0], start[1]);
      for (const p of vm.trail) {
        const q = at(p);
        ctx.lineTo(q[0], q[1]);
      }
      ctx.stroke();
    }

    // Arm skeleton.
    const fk = chain.forward(state.joints);
    ctx.strokeStyle = COLORS.arm;
    ctx.lineWidth = 3;
    ctx.beginPath();
    const base = at([0, 0, 0]);
    ctx.moveTo(base[0], base[1]);
    for (const p of fk.points) {
      const q = at(p);
      ctx.lineTo(q[0], q[1]);
    }
    ctx.stroke();
    ctx.fillStyle = COLORS.joint;
    for (const p of fk.points.slice(0, -1)) {
      const q = at(p);
      ctx.beginPath();
      ctx.arc(q[0], q[1], 3, 0, 2 * Math.PI);
      ctx.fill();
    }
    const ee = at(state.ee_position);
    ctx.fillStyle = COLORS.ee;
    ctx.beginPath();
    ctx.arc(ee[0], ee[1], 5, 0, 2 * Math.PI);
    ctx.fill();
  }

  // Stylus crosshair: operator input, not robot state.
  const stylus = at(vm.stylus);
  ctx.strokeStyle = COLORS.stylus;
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(stylus[0] - 7, stylus[1]);
  ctx.lineTo(stylus[0] + 7, stylus[1]);
  ctx.moveTo(stylus[0], stylus[1] - 7);
  ctx.lineTo(stylus[0], stylus[1] + 7);
  ctx.stroke();

  // Safety tint around the frame.
  if (state?.estopped) {
    ctx.strokeStyle = COLORS.estop;
  } else if (state?.safe_hold) {
    ctx.strokeStyle = COLORS.safeHold;
  } else {
    return;
  }
  ctx.lineWidth = 3;
  ctx.strokeRect(1, 1, viewport.width - 2, viewport.height - 2);
}
