import { mulberry32 } from "./prng.js";

// The stimulus is a ring of dots standing in for the pole. Each frame a
// coherent subset rotates with the pole's motion while the rest scatter, so
// how much of the crowd "agrees" is the knob the study turns.

export interface RdkConfig {
  dotCount: number;
  radius: number;
  dotSize: number;
  coherence: number;
}

export const DEFAULT_RDK: RdkConfig = {
  dotCount: 200,
  radius: 180,
  dotSize: 3,
  coherence: 0.5,
};

export function validateRdk(cfg: RdkConfig): void {
  if (!(cfg.coherence >= 0 && cfg.coherence <= 1)) {
    throw new Error(`coherence must be in [0, 1], got ${cfg.coherence}`);
  }
  if (!(cfg.dotCount > 0)) throw new Error("dotCount must be positive");
}

export function initDots(cfg: RdkConfig, seed: number): Float64Array {
  const rng = mulberry32(seed);
  const angles = new Float64Array(cfg.dotCount);
  for (let i = 0; i < angles.length; i++) angles[i] = rng() * 2 * Math.PI;
  return angles;
}

// Membership rule: the coherent set fills from one index-parity class,
// swapping class every frame, then tops up by ascending index from the other.
// At coherence 0.5 with an even count this is exactly "alternating halves".
export function coherentMask(n: number, coherence: number, parity: 0 | 1): Uint8Array {
  const mask = new Uint8Array(n);
  let want = Math.round(coherence * n);
  for (let i = parity; i < n && want > 0; i += 2) {
    mask[i] = 1;
    want--;
  }
  for (let i = 1 - parity; i < n && want > 0; i += 2) {
    mask[i] = 1;
    want--;
  }
  return mask;
}

/** One stimulus frame: returns the new dot angles (radians on the ring). */
export function renderRdk(
  prev: Float64Array,
  deltaTheta: number,
  cfg: RdkConfig,
  frameSeed: number,
  parity: 0 | 1,
): Float64Array {
  const mask = coherentMask(prev.length, cfg.coherence, parity);
  const rng = mulberry32(frameSeed);
  const next = new Float64Array(prev.length);
  for (let i = 0; i < prev.length; i++) {
    next[i] = mask[i] ? prev[i] + deltaTheta : rng() * 2 * Math.PI;
  }
  return next;
}

/** Stateful wrapper owning the parity alternation and the running field. */
export class RdkField {
  angles: Float64Array;
  private parity: 0 | 1 = 0;

  constructor(readonly cfg: RdkConfig, seed = 1) {
    validateRdk(cfg);
    this.angles = initDots(cfg, seed);
  }

  step(deltaTheta: number, frameSeed: number): Float64Array {
    this.angles = renderRdk(this.angles, deltaTheta, this.cfg, frameSeed, this.parity);
    this.parity = this.parity === 0 ? 1 : 0;
    return this.angles;
  }
}
