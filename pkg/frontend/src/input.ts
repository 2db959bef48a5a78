// Operator controls -> normalized command vector.
//
// Keyboard nudges the velocities (arrows: sweep and penetrate, Q/E: rotate);
// sliders set the force/displacement limits directly. Commands are sent only
// on change, rate-limited to 20 Hz.

import { ACTION_DIM, clampAction } from "./protocol";

export const SEND_MIN_INTERVAL_MS = 50; // 20 Hz

const VELOCITY_NUDGE = 0.1;

// Action-vector indices.
export const SWEEP_VEL = 0;
export const SWEEP_F_LIM = 1;
export const SWEEP_D_LIM = 2;
export const ROTATE_VEL = 3;
export const ROTATE_M_LIM = 4;
export const ROTATE_A_LIM = 5;
export const PEN_VEL = 6;
export const PEN_F_LIM = 7;

const KEY_NUDGES: Record<string, [number, number]> = {
  ArrowLeft: [SWEEP_VEL, -VELOCITY_NUDGE],
  ArrowRight: [SWEEP_VEL, +VELOCITY_NUDGE],
  ArrowDown: [PEN_VEL, -VELOCITY_NUDGE],
  ArrowUp: [PEN_VEL, +VELOCITY_NUDGE],
  q: [ROTATE_VEL, -VELOCITY_NUDGE],
  e: [ROTATE_VEL, +VELOCITY_NUDGE],
};

export interface SliderInput { index: number; value: number; }

export class CommandComposer {
  private command: number[];
  private lastSentAt = -Infinity;
  private dirty = false;

  constructor(initial?: number[]) {
    this.command = clampAction(initial ?? new Array(ACTION_DIM).fill(0));
  }

  current(): number[] {
    return [...this.command];
  }

  keyPress(key: string): boolean {
    const nudge = KEY_NUDGES[key];
    if (!nudge) {
      return false;
    }
    const [index, delta] = nudge;
    const next = Math.min(1, Math.max(-1, this.command[index] + delta));
    if (next !== this.command[index]) {
      this.command[index] = next;
      this.dirty = true;
    }
    return true;
  }

  slider({ index, value }: SliderInput): void {
    const next = Math.min(1, Math.max(-1, value));
    if (next !== this.command[index]) {
      this.command[index] = next;
      this.dirty = true;
    }
  }

  zeroVelocities(): void {
    for (const index of [SWEEP_VEL, ROTATE_VEL, PEN_VEL]) {
      if (this.command[index] !== 0) {
        this.command[index] = 0;
        this.dirty = true;
      }
    }
  }

  /** The command to put on the wire now, or null if unchanged/rate-limited.
      Every returned vector is already clamped to [-1, 1]^8. */
  poll(nowMs: number): number[] | null {
    if (!this.dirty || nowMs - this.lastSentAt < SEND_MIN_INTERVAL_MS) {
      return null;
    }
    this.dirty = false;
    this.lastSentAt = nowMs;
    return this.current();
  }
}
