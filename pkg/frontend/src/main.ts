import { AppState } from "./appState.js";
import { AudioEngine, instrumentFor } from "./audioEngine.js";
import type { ModelName, SoundParams } from "./protocol.js";
import { BoardView } from "./view.js";
import { WsClient } from "./wsClient.js";

const engine = new AudioEngine();
const state = new AppState({
  setEnabled: (enabled: boolean, model: ModelName) => engine.setEnabled(enabled, instrumentFor(model)),
  onParams: (params: SoundParams) => engine.onParams(params),
});
const client = new WsClient();

const canvas = document.getElementById("board") as HTMLCanvasElement;
const view = new BoardView(canvas, state);
const status = document.getElementById("status") as HTMLElement;
const scoreBox = document.getElementById("score") as HTMLElement;
const urlInput = document.getElementById("server-url") as HTMLInputElement;
const modelSelect = document.getElementById("model") as HTMLSelectElement;
const buttons = {
  connect: document.getElementById("connect") as HTMLButtonElement,
  startTrial: document.getElementById("start-trial") as HTMLButtonElement,
  drawMargin: document.getElementById("draw-margin") as HTMLButtonElement,
  placeSeed: document.getElementById("place-seed") as HTMLButtonElement,
  submit: document.getElementById("submit") as HTMLButtonElement,
};

function refresh(): void {
  status.textContent = state.connected
    ? state.trialActive
      ? `trial ${state.trialId} (${state.model}) — mode: ${state.mode}`
      : state.sessionId
        ? `session ${state.sessionId} — start a trial`
        : "connected"
    : "disconnected";
  status.className = state.connected ? "ok" : "down";
  if (state.lastError) status.textContent += ` — ${state.lastError}`;
  if (state.reveal) {
    const r = state.reveal.report;
    scoreBox.textContent =
      `dice ${r.dice.toFixed(3)} · area ratio ${r.area_ratio.toFixed(3)} · ` +
      `intercentroid ${r.intercentroid_mm.toFixed(1)} mm`;
  } else {
    scoreBox.textContent = "";
  }
  view.draw();
}

client.onOpen = () => {
  state.onOpen();
  client.send({ type: "start_session" });
  refresh();
};
client.onClose = () => {
  state.onClose();
  refresh();
};
client.onMessage = (msg) => {
  state.onServerMsg(msg);
  refresh();
};

buttons.connect.onclick = () => {
  engine.ensureContext(); // user gesture unlocks audio
  client.connect(urlInput.value);
};
buttons.startTrial.onclick = () => {
  client.send({ type: "start_trial", model: modelSelect.value as ModelName });
};
buttons.drawMargin.onclick = () => {
  state.mode = "draw-margin";
  refresh();
};
buttons.placeSeed.onclick = () => {
  state.mode = "place-seed";
  refresh();
};
buttons.submit.onclick = () => {
  client.send({ type: "finish_trial" });
};

let drawing = false;
canvas.addEventListener("pointerdown", (ev) => {
  if (!state.trialActive) return;
  const p = view.toMm(ev);
  if (state.mode === "draw-margin") {
    drawing = true;
    state.marginPath = [p];
  } else if (state.mode === "place-seed") {
    state.seedMark = p;
    client.send({ type: "mark_seed", x_mm: p[0], y_mm: p[1] });
  }
  refresh();
});
canvas.addEventListener("pointermove", (ev) => {
  if (!state.trialActive) return;
  const [x, y] = view.toMm(ev);
  if (drawing && state.mode === "draw-margin") {
    state.marginPath.push([x, y]);
    refresh();
  } else if (state.mode === "explore") {
    client.send({ type: "probe", x_mm: x, y_mm: y, t_ms: performance.now() });
  }
});
canvas.addEventListener("pointerup", () => {
  if (drawing && state.marginPath.length >= 3) {
    client.send({ type: "mark_margin", path: state.marginPath });
  }
  drawing = false;
  refresh();
});

refresh();
