export type Point = [number, number];

export interface SceneObjectDoc {
  label: string;
  pos: Point;
}

export interface WorldDoc {
  start: Point;
  goal: Point;
  objects: SceneObjectDoc[];
}

export type Engine = "model" | "oracle";

export interface NewSessionResponse {
  id: string;
  engine: Engine;
  world: WorldDoc;
  trajectory: Point[];
}

export interface SessionDoc {
  id: string;
  engine: Engine;
  world: WorldDoc;
  trajectory: Point[];
  history: { command: string; trajectory: Point[] }[];
}

export interface CommandResponse {
  trajectory: Point[];
  similarity: number[];
  engine: Engine;
  elapsed_ms: number;
}

export interface UndoResponse {
  trajectory: Point[];
  history_length: number;
}

export interface SweepEntry {
  split: string;
  direction: string;
  intensity: string;
  command: string;
  trajectory: Point[];
}

export interface SweepResponse {
  target: number;
  label: string;
  xi_o: Point[];
  grid: SweepEntry[];
}

export interface HealthResponse {
  status: string;
  checkpoint: string | null;
  version: string;
}
