// Teleop panel wiring: WebSocket session, input composer, render loop.
//
// Network receive updates a latest-state buffer; the render loop reads it at
// display rate. Outbound commands go through the rate-limited composer, so
// the UI can never stall the episode.

import { CommandComposer } from "./input";
import { ACTION_LABELS, PROTOCOL_VERSION, commandMessage, decodeMessage,
         encodeMessage } from "./protocol";
import { drawGauge, drawScene, frameGauges } from "./render";
import { applyServerMessage, initialState, noteCommandSent,
         setConnection } from "./session";

const $ = (id: string) => document.getElementById(id)!;

let state = initialState();
const composer = new CommandComposer();
let socket: WebSocket | null = null;

function connect(): void {
  const url = ($("server-url") as HTMLInputElement).value;
  state = setConnection(state, "connecting");
  socket = new WebSocket(url);
  socket.onopen = () => {
    state = setConnection(state, "connected");
    socket!.send(encodeMessage({ kind: "hello", version: PROTOCOL_VERSION }));
  };
  socket.onmessage = (event) => {
    state = applyServerMessage(state, decodeMessage(String(event.data)));
  };
  socket.onclose = () => {
    state = setConnection(state, "disconnected");
  };
}

function startEpisode(): void {
  if (!socket || socket.readyState !== WebSocket.OPEN) {
    return;
  }
  const terrain = ($("terrain") as HTMLSelectElement).value;
  const seed = parseInt(($("seed") as HTMLInputElement).value, 10) || 0;
  socket.send(encodeMessage({ kind: "start", terrain, seed }));
}

function pumpCommands(): void {
  if (!socket || socket.readyState !== WebSocket.OPEN || !state.recording) {
    return;
  }
  const pending = composer.poll(performance.now());
  if (pending) {
    socket.send(encodeMessage(commandMessage(pending)));
    state = noteCommandSent(state, pending);
  }
}

function renderLoop(): void {
  const canvas = $("scene") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  drawScene(ctx, canvas.width, canvas.height, state.latest);

  const gaugeCanvas = $("gauges") as HTMLCanvasElement;
  const gctx = gaugeCanvas.getContext("2d")!;
  gctx.clearRect(0, 0, gaugeCanvas.width, gaugeCanvas.height);
  if (state.latest) {
    const g = frameGauges(state.latest, composer.current());
    drawGauge(gctx, 10, 10, gaugeCanvas.width - 20, 22, "fx", g.fx);
    drawGauge(gctx, 10, 42, gaugeCanvas.width - 20, 22, "fz", g.fz);
    drawGauge(gctx, 10, 74, gaugeCanvas.width - 20, 22, "m", g.m);
    gctx.fillStyle = "#21262d";
    gctx.fillRect(10, 106, gaugeCanvas.width - 20, 14);
    gctx.fillStyle = "#58a6ff";
    gctx.fillRect(10, 106, (gaugeCanvas.width - 20) * g.depth, 14);
    gctx.fillStyle = "#c9d1d9";
    gctx.font = "12px monospace";
    gctx.fillText(
      `depth ${(state.latest.depth * 1000).toFixed(1)} mm  reward ` +
      `${state.latest.reward_sum.toFixed(2)}  step ${state.latest.step}` +
      (state.latest.clamped ? "  [clamped]" : ""),
      12, 131);
  }

  $("status").textContent =
    `${state.connection}` +
    (state.serverVersion !== null ? ` (protocol v${state.serverVersion})` : "") +
    (state.recording ? " - recording" : "") +
    (state.lastError ? ` - error: ${state.lastError}` : "");
  $("log").textContent = state.episodeLog
    .map((e, i) => `#${i + 1} ${e.outcome} reward ${e.rewardSum.toFixed(2)} ` +
                   `(${e.steps} steps)`)
    .join("\n");

  const values = composer.current();
  $("command").textContent = values
    .map((v, i) => `${ACTION_LABELS[i]}: ${v.toFixed(2)}`)
    .join("   ");

  pumpCommands();
  requestAnimationFrame(renderLoop);
}

export function init(): void {
  $("connect").addEventListener("click", connect);
  $("start").addEventListener("click", startEpisode);
  $("stop").addEventListener("click", () => composer.zeroVelocities());
  document.addEventListener("keydown", (event) => {
    if (composer.keyPress(event.key)) {
      event.preventDefault();
    }
  });
  document.querySelectorAll<HTMLInputElement>("input[data-slider]").forEach(
    (slider) => {
      slider.addEventListener("input", () => {
        composer.slider({
          index: parseInt(slider.dataset.slider!, 10),
          value: parseFloat(slider.value),
        });
      });
    });
  renderLoop();
}

init();
