import { ApiClient, ApiError } from "./api.js";
import { drawScene, drawSimilarityBars, drawSweepGrid } from "./draw.js";
import {
  canSubmit,
  canUndo,
  commandApplied,
  failed,
  initialState,
  lastCommand,
  otherEngine,
  overlaySet,
  sceneCreated,
  undone,
  ViewState,
} from "./state.js";
import type { Engine } from "./types.js";

const CANVAS_SIZE = 560;

export function setup(doc: Document, api: ApiClient = new ApiClient()) {
  let state: ViewState = initialState();

  const canvas = doc.getElementById("scene") as HTMLCanvasElement;
  const simCanvas = doc.getElementById("similarity") as HTMLCanvasElement;
  const sweepCanvas = doc.getElementById("sweep") as HTMLCanvasElement;
  const input = doc.getElementById("command") as HTMLInputElement;
  const sendBtn = doc.getElementById("send") as HTMLButtonElement;
  const undoBtn = doc.getElementById("undo") as HTMLButtonElement;
  const newBtn = doc.getElementById("new-scene") as HTMLButtonElement;
  const engineSel = doc.getElementById("engine") as HTMLSelectElement;
  const compareBtn = doc.getElementById("compare") as HTMLButtonElement;
  const sweepBtn = doc.getElementById("sweep-btn") as HTMLButtonElement;
  const banner = doc.getElementById("error") as HTMLElement;
  const logList = doc.getElementById("log") as HTMLElement;

  const ctx = canvas.getContext("2d");
  const simCtx = simCanvas.getContext("2d");
  const sweepCtx = sweepCanvas.getContext("2d");

  function render() {
    if (ctx) drawScene(ctx as never, state, CANVAS_SIZE);
    if (simCtx && state.world) {
      drawSimilarityBars(simCtx as never, state.world.objects.map((o) => o.label),
        state.similarity, simCanvas.width);
    }
    banner.textContent = state.error ?? "";
    banner.style.display = state.error ? "block" : "none";
    sendBtn.disabled = !canSubmit(state);
    undoBtn.disabled = !canUndo(state);
    compareBtn.disabled = !canSubmit(state) || lastCommand(state) === null;
    sweepBtn.disabled = !canSubmit(state);
    logList.innerHTML = "";
    for (const entry of state.log) {
      const li = doc.createElement("li");
      li.textContent = `[${entry.engine}] ${entry.command} (${entry.elapsedMs.toFixed(0)} ms)`;
      logList.appendChild(li);
    }
  }

  function setState(next: ViewState) {
    state = next;
    render();
  }

  async function guarded(action: () => Promise<ViewState>) {
    if (state.pending) return;
    setState({ ...state, pending: true });
    try {
      const next = await action();
      setState({ ...next, pending: false });
    } catch (e) {
      const reason = e instanceof ApiError ? `${e.status}: ${e.message}` : String(e);
      setState({ ...failed(state, reason), pending: false });
    }
  }

  newBtn.addEventListener("click", () =>
    guarded(async () => {
      const engine = engineSel.value as Engine;
      const res = await api.newSession(engine);
      return sceneCreated(state, res.id, res.engine, res.world, res.trajectory);
    }));

  sendBtn.addEventListener("click", () =>
    guarded(async () => {
      const text = input.value.trim();
      if (!text || !state.sessionId) return state;
      const res = await api.command(state.sessionId, text, engineSel.value as Engine);
      input.value = "";
      return commandApplied(state, text, res.trajectory, res.similarity, res.engine,
        res.elapsed_ms);
    }));

  input.addEventListener("keydown", (ev) => {
    if ((ev as KeyboardEvent).key === "Enter") sendBtn.click();
  });

  undoBtn.addEventListener("click", () =>
    guarded(async () => {
      if (!state.sessionId || state.historyLength <= 1) return state;
      const res = await api.undo(state.sessionId);
      return undone(state, res.trajectory, res.history_length);
    }));

  compareBtn.addEventListener("click", () =>
    guarded(async () => {
      const last = lastCommand(state);
      if (!last || !state.sessionId) return state;
      const engine = otherEngine(last.engine);
      const res = await api.preview(state.sessionId, last.command, engine);
      return overlaySet(state, res.trajectory, engine);
    }));

  sweepBtn.addEventListener("click", () =>
    guarded(async () => {
      if (!state.sessionId) return state;
      const res = await api.sweep(state.sessionId);
      if (sweepCtx) {
        drawSweepGrid(sweepCtx as never, res.xi_o, res.grid, 140, 4);
      }
      return state;
    }));

  render();
  return {
    getState: () => state,
    render,
  };
}

declare global {
  interface Window {
    semtrajSetup?: typeof setup;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" &&
    document.getElementById("scene")) {
  window.semtrajSetup = setup;
  setup(document);
}
