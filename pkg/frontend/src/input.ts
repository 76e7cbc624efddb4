// Joystick axis with a keyboard fallback. Gamepads pass their raw axis
// through the dead zone; arrow keys drive a ramp so taps feel like nudges
// and holds reach full deflection. All time comes in via arguments so the
// ramp is testable without a clock.

export const DEAD_ZONE = 0.02;
export const RAMP_MS = 300;

export function deadZone(v: number): number {
  return Math.abs(v) < DEAD_ZONE ? 0 : Math.max(-1, Math.min(1, v));
}

export class InputAxis {
  private target = 0;
  private value = 0;
  private lastMs: number;

  constructor(startMs = 0, private rampMs: number = RAMP_MS) {
    this.lastMs = startMs;
  }

  private advance(nowMs: number): void {
    const dt = Math.max(0, nowMs - this.lastMs);
    this.lastMs = nowMs;
    const maxStep = dt / this.rampMs; // full swing 0 -> 1 in rampMs
    const diff = this.target - this.value;
    if (Math.abs(diff) <= maxStep) {
      this.value = this.target;
    } else {
      this.value += Math.sign(diff) * maxStep;
    }
  }

  keyDown(dir: -1 | 1, nowMs: number): void {
    this.advance(nowMs);
    this.target = dir;
  }

  keyUp(dir: -1 | 1, nowMs: number): void {
    this.advance(nowMs);
    if (this.target === dir) this.target = 0;
  }

  /** Current deflection in [-1, 1], dead-zoned. */
  read(nowMs: number): number {
    this.advance(nowMs);
    return deadZone(this.value);
  }
}
