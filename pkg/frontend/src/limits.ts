// Physical parameter ranges mirrored from the primitive engine so gauges can
// show live forces against the currently commanded limits.

export interface Range { lo: number; hi: number; }

export const PARAM_RANGES: Range[] = [
  { lo: -0.1, hi: 0.1 },    // sweep velocity, m/s
  { lo: 25, hi: 40 },       // sweep force limit, N
  { lo: 0.015, hi: 0.03 },  // sweep displacement limit, m
  { lo: -0.5, hi: 0.5 },    // rotate velocity, rad/s
  { lo: 40, hi: 70 },       // rotate moment limit, N*m
  { lo: 0.1, hi: 0.2 },     // rotate angle limit, rad
  { lo: -0.03, hi: 0.03 },  // penetrate velocity, m/s
  { lo: 40, hi: 70 },       // penetrate force limit, N
];

export const HALT_FORCE = 90;
export const TARGET_DEPTH = 0.05;

export function denormalize(component: number, index: number): number {
  const { lo, hi } = PARAM_RANGES[index];
  return lo + 0.5 * (component + 1) * (hi - lo);
}

export interface GaugeView {
  value: number;       // measured magnitude
  limit: number;       // active primitive limit (denormalized)
  halt: number;        // controller halt threshold
  fillFraction: number; // value / halt, clamped to [0, 1]
  warning: boolean;    // value above the primitive limit
}

export function forceGauge(measured: number, limitComponent: number,
                           limitIndex: number): GaugeView {
  const limit = denormalize(limitComponent, limitIndex);
  const value = Math.abs(measured);
  return {
    value,
    limit,
    halt: HALT_FORCE,
    fillFraction: Math.min(1, value / HALT_FORCE),
    warning: value > limit,
  };
}

export function depthFraction(depth: number): number {
  return Math.min(1, Math.max(0, depth / TARGET_DEPTH));
}
