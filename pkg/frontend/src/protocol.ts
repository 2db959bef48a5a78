// Wire protocol shared with the teleop service: newline-free JSON text
// frames over WebSocket, one message per frame.

export const PROTOCOL_VERSION = 1;
export const ACTION_DIM = 8;

// Action vector layout (normalized, each component in [-1, 1]):
// [ sweep velocity, sweep force limit, sweep displacement limit,
//   rotate velocity, rotate moment limit, rotate angle limit,
//   penetrate velocity, penetrate force limit ]
export const ACTION_LABELS = [
  "sweep vel", "sweep F lim", "sweep d lim",
  "rotate vel", "rotate M lim", "rotate a lim",
  "penetrate vel", "penetrate F lim",
] as const;

export interface HelloMsg { kind: "hello"; version: number; }
export interface StartMsg {
  kind: "start";
  terrain: string;
  seed: number;
  lockstep?: boolean;
}
export interface StateMsg {
  kind: "state";
  step: number;
  pose: [number, number, number];
  vel: [number, number, number];
  force: [number, number, number];
  depth: number;
  reward_sum: number;
  clamped: boolean;
  done: boolean;
}
export interface CommandMsg { kind: "command"; a: number[]; }
export interface EndMsg {
  kind: "end";
  outcome: "success" | "jam" | "timeout";
  reward_sum: number;
}
export interface ResetMsg { kind: "reset"; }
export interface ErrorMsg { kind: "error"; msg: string; }

export type ServerMsg = HelloMsg | StateMsg | EndMsg | ErrorMsg;
export type ClientMsg = HelloMsg | StartMsg | CommandMsg | ResetMsg;

export function clampAction(a: number[]): number[] {
  return a.map((v) => Math.min(1, Math.max(-1, v)));
}

export function commandMessage(a: number[]): CommandMsg {
  if (a.length !== ACTION_DIM) {
    throw new Error(`command needs ${ACTION_DIM} components, got ${a.length}`);
  }
  return { kind: "command", a: clampAction(a) };
}

export function encodeMessage(msg: ClientMsg): string {
  return JSON.stringify(msg);
}

export function decodeMessage(raw: string): ServerMsg {
  const msg = JSON.parse(raw);
  if (typeof msg !== "object" || msg === null || typeof msg.kind !== "string") {
    throw new Error(`malformed message: ${raw.slice(0, 80)}`);
  }
  switch (msg.kind) {
    case "hello":
    case "state":
    case "end":
    case "error":
      return msg as ServerMsg;
    default:
      throw new Error(`unexpected message kind ${msg.kind}`);
  }
}
