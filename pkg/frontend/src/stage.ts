/** Stage input mapping: pointer gestures to stylus motion.
 *
 * The stage canvas shows the top view (world x right, world y up), so a drag
 * simply is stylus x/y travel at a fixed pixels-to-meters scale; the wheel
 * nudges z.  Keeping the mapping linear and stateless makes the commanded
 * displacement of a gesture exactly `scale * pixels`, which is what the
 * operator calibrates their hand to.
 */

export const STAGE_SCALE = 0.0005; // meters of stylus travel per pixel
export const WHEEL_SCALE = 0.0002; // meters of stylus z per wheel unit

export class DragTracker {
  private last: [number, number] | null = null;

  start(x: number, y: number): void {
    this.last = [x, y];
  }

  /** Returns the stylus delta for a pointer move, or null when not dragging. */
  move(x: number, y: number): [number, number, number] | null {
    if (this.last === null) {
      return null;
    }
    const dx = (x - this.last[0]) * STAGE_SCALE;
    const dy = -(y - this.last[1]) * STAGE_SCALE; // screen y grows downward
    this.last = [x, y];
    return [dx, dy, 0];
  }

  end(): void {
    this.last = null;
  }

  get dragging(): boolean {
    return this.last !== null;
  }
}

export function wheelToZ(deltaY: number): number {
  return -deltaY * WHEEL_SCALE;
}
