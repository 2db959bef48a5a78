// Canvas cross-section view: terrain surface, bucket pose, depth bar, and
// force gauges against the active limits and the halt threshold.

import { GaugeView, TARGET_DEPTH, depthFraction, forceGauge } from "./limits";
import { StateMsg } from "./protocol";
import { PEN_F_LIM, ROTATE_M_LIM, SWEEP_F_LIM } from "./input";

const VIEW_HALF_WIDTH = 0.2; // m, matches the tray cross-section
const VIEW_DEPTH = 0.1; // m shown below the surface
const SKY = 0.25; // fraction of canvas above the surface line

export interface FrameGauges {
  fx: GaugeView;
  fz: GaugeView;
  m: GaugeView;
  depth: number; // fraction of target depth
}

export function frameGauges(state: StateMsg, command: number[]): FrameGauges {
  return {
    fx: forceGauge(state.force[0], command[SWEEP_F_LIM], SWEEP_F_LIM),
    fz: forceGauge(state.force[1], command[PEN_F_LIM], PEN_F_LIM),
    m: forceGauge(state.force[2], command[ROTATE_M_LIM], ROTATE_M_LIM),
    depth: depthFraction(state.depth),
  };
}

export function drawScene(ctx: CanvasRenderingContext2D, width: number,
                          height: number, state: StateMsg | null): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#0d1117";
  ctx.fillRect(0, 0, width, height);

  const surfaceY = height * SKY;
  ctx.fillStyle = "#3b2f23";
  ctx.fillRect(0, surfaceY, width, height - surfaceY);
  ctx.strokeStyle = "#8a6f4d";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(0, surfaceY);
  ctx.lineTo(width, surfaceY);
  ctx.stroke();

  // target depth line
  const targetY = surfaceY + (TARGET_DEPTH / VIEW_DEPTH) * (height - surfaceY);
  ctx.strokeStyle = "#4f7942";
  ctx.setLineDash([6, 6]);
  ctx.beginPath();
  ctx.moveTo(0, targetY);
  ctx.lineTo(width, targetY);
  ctx.stroke();
  ctx.setLineDash([]);

  if (!state) {
    return;
  }
  const [x, z, pitch] = state.pose;
  const px = ((x + VIEW_HALF_WIDTH) / (2 * VIEW_HALF_WIDTH)) * width;
  const py = surfaceY - (z / VIEW_DEPTH) * (height - surfaceY);

  // bucket: a short blade drawn at the pitch angle, teeth at (px, py)
  const blade = Math.min(width, height) * 0.12;
  ctx.save();
  ctx.translate(px, py);
  ctx.rotate(-pitch);
  ctx.strokeStyle = state.done ? "#e3b341" : "#58a6ff";
  ctx.lineWidth = 4;
  ctx.beginPath();
  ctx.moveTo(0, 0);
  ctx.lineTo(blade * 0.55, -blade);
  ctx.moveTo(0, 0);
  ctx.lineTo(-blade * 0.35, -blade * 0.75);
  ctx.stroke();
  ctx.restore();
}

export function drawGauge(ctx: CanvasRenderingContext2D, x: number, y: number,
                          w: number, h: number, label: string,
                          gauge: GaugeView): void {
  ctx.fillStyle = "#21262d";
  ctx.fillRect(x, y, w, h);
  ctx.fillStyle = gauge.warning ? "#d29922" : "#2ea043";
  ctx.fillRect(x, y, w * gauge.fillFraction, h);
  // limit and halt markers
  const limitX = x + w * Math.min(1, gauge.limit / gauge.halt);
  ctx.strokeStyle = "#d29922";
  ctx.beginPath();
  ctx.moveTo(limitX, y);
  ctx.lineTo(limitX, y + h);
  ctx.stroke();
  ctx.strokeStyle = "#f85149";
  ctx.beginPath();
  ctx.moveTo(x + w - 1, y);
  ctx.lineTo(x + w - 1, y + h);
  ctx.stroke();
  ctx.fillStyle = "#c9d1d9";
  ctx.font = "12px monospace";
  ctx.fillText(`${label} ${gauge.value.toFixed(1)} / lim ${gauge.limit.toFixed(0)}`,
               x + 4, y + h - 4);
}
