import type { Engine, Point, WorldDoc } from "./types.js";

export interface LogEntry {
  command: string;
  engine: Engine;
  elapsedMs: number;
}

/** Everything the canvas and panels render. Trajectories always mirror the
 * latest server response; the UI never computes its own geometry. */
export interface ViewState {
  sessionId: string | null;
  engine: Engine;
  world: WorldDoc | null;
  original: Point[] | null;
  current: Point[] | null;
  ghost: Point[] | null;
  overlay: Point[] | null;
  overlayEngine: Engine | null;
  similarity: number[];
  log: LogEntry[];
  error: string | null;
  pending: boolean;
  historyLength: number;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    engine: "oracle",
    world: null,
    original: null,
    current: null,
    ghost: null,
    overlay: null,
    overlayEngine: null,
    similarity: [],
    log: [],
    error: null,
    pending: false,
    historyLength: 0,
  };
}

export function sceneCreated(
  state: ViewState,
  id: string,
  engine: Engine,
  world: WorldDoc,
  trajectory: Point[],
): ViewState {
  return {
    ...initialState(),
    sessionId: id,
    engine,
    world,
    original: trajectory,
    current: trajectory,
    historyLength: 1,
  };
}

export function commandApplied(
  state: ViewState,
  command: string,
  trajectory: Point[],
  similarity: number[],
  engine: Engine,
  elapsedMs: number,
): ViewState {
  return {
    ...state,
    ghost: state.current,
    current: trajectory,
    overlay: null,
    overlayEngine: null,
    similarity,
    log: [...state.log, { command, engine, elapsedMs }],
    error: null,
    historyLength: state.historyLength + 1,
  };
}

export function undone(state: ViewState, trajectory: Point[], historyLength: number): ViewState {
  return {
    ...state,
    current: trajectory,
    ghost: null,
    overlay: null,
    overlayEngine: null,
    log: state.log.slice(0, -1),
    error: null,
    historyLength,
  };
}

export function overlaySet(state: ViewState, trajectory: Point[], engine: Engine): ViewState {
  return { ...state, overlay: trajectory, overlayEngine: engine, error: null };
}

export function failed(state: ViewState, reason: string): ViewState {
  return { ...state, error: reason };
}

export function canUndo(state: ViewState): boolean {
  return state.historyLength > 1 && !state.pending;
}

export function canSubmit(state: ViewState): boolean {
  return state.sessionId !== null && !state.pending;
}

export function lastCommand(state: ViewState): LogEntry | null {
  return state.log.length ? state.log[state.log.length - 1] : null;
}

export function otherEngine(engine: Engine): Engine {
  return engine === "model" ? "oracle" : "model";
}
