// Session state: a pure reducer over server messages plus a latest-state
// buffer so rendering never blocks the episode.

import { EndMsg, ServerMsg, StateMsg } from "./protocol";

export type Connection = "disconnected" | "connecting" | "connected";

export interface EpisodeLogEntry {
  outcome: string;
  rewardSum: number;
  steps: number;
}

export interface UiSessionState {
  connection: Connection;
  latest: StateMsg | null;
  lastCommand: number[];
  recording: boolean;
  episodeLog: EpisodeLogEntry[];
  lastError: string | null;
  serverVersion: number | null;
}

export function initialState(): UiSessionState {
  return {
    connection: "disconnected",
    latest: null,
    lastCommand: new Array(8).fill(0),
    recording: false,
    episodeLog: [],
    lastError: null,
    serverVersion: null,
  };
}

export function applyServerMessage(state: UiSessionState,
                                   msg: ServerMsg): UiSessionState {
  switch (msg.kind) {
    case "hello":
      return { ...state, serverVersion: msg.version };
    case "state":
      return { ...state, latest: msg, recording: !msg.done };
    case "end": {
      const entry: EpisodeLogEntry = {
        outcome: msg.outcome,
        rewardSum: msg.reward_sum,
        steps: state.latest ? state.latest.step : 0,
      };
      return {
        ...state,
        recording: false,
        episodeLog: [...state.episodeLog, entry],
      };
    }
    case "error":
      return { ...state, lastError: msg.msg };
  }
}

export function setConnection(state: UiSessionState,
                              connection: Connection): UiSessionState {
  return connection === "connected"
    ? { ...state, connection, lastError: null }
    : { ...state, connection };
}

export function noteCommandSent(state: UiSessionState,
                                command: number[]): UiSessionState {
  return { ...state, lastCommand: [...command] };
}

/** Replay a recorded message sequence through the reducer; used by tests to
    pin frame-by-frame determinism. */
export function replay(messages: ServerMsg[]): UiSessionState[] {
  const frames: UiSessionState[] = [];
  let state = initialState();
  for (const msg of messages) {
    state = applyServerMessage(state, msg);
    frames.push(state);
  }
  return frames;
}
