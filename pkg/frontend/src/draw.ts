import type { Point, SweepEntry, WorldDoc } from "./types.js";
import type { ViewState } from "./state.js";

/** Subset of CanvasRenderingContext2D the renderer touches, so tests can
 * substitute a recording stub. */
export interface Ctx2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
}

export const COLORS = {
  original: "#2e9e4f", // green, matching the usual original-trajectory color
  current: "#1f6fd6",
  ghost: "#9aa7b3",
  overlay: "#d6581f",
  object: "#444",
  start: "#2e9e4f",
  goal: "#c0392b",
};

/** Workspace [0,1]^2 to canvas pixels. +Y in the workspace means "back", so
 * the Y axis flips to render back as up. */
export function toCanvas(p: Point, size: number): Point {
  return [p[0] * size, (1 - p[1]) * size];
}

export function drawPolyline(
  ctx: Ctx2D,
  points: Point[],
  size: number,
  color: string,
  width = 2,
  dash: number[] = [],
): void {
  if (!points.length) return;
  ctx.setLineDash(dash);
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  points.forEach((p, i) => {
    const [x, y] = toCanvas(p, size);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
  ctx.setLineDash([]);
}

function drawMarker(ctx: Ctx2D, p: Point, size: number, color: string, radius: number): void {
  const [x, y] = toCanvas(p, size);
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(x, y, radius, 0, Math.PI * 2);
  ctx.fill();
}

export function drawWorld(ctx: Ctx2D, world: WorldDoc, size: number): void {
  ctx.font = "12px sans-serif";
  for (const obj of world.objects) {
    drawMarker(ctx, obj.pos, size, COLORS.object, 5);
    const [x, y] = toCanvas(obj.pos, size);
    ctx.fillStyle = "#222";
    ctx.fillText(obj.label, x + 8, y + 4);
  }
  drawMarker(ctx, world.start, size, COLORS.start, 7);
  drawMarker(ctx, world.goal, size, COLORS.goal, 7);
}

/** Full scene redraw: world, original, ghost, current, optional overlay. */
export function drawScene(ctx: Ctx2D, state: ViewState, size: number): void {
  ctx.clearRect(0, 0, size, size);
  if (!state.world) return;
  if (state.original) drawPolyline(ctx, state.original, size, COLORS.original, 2, [6, 4]);
  if (state.ghost) drawPolyline(ctx, state.ghost, size, COLORS.ghost, 1.5, [2, 3]);
  if (state.current) drawPolyline(ctx, state.current, size, COLORS.current, 2.5);
  if (state.overlay) drawPolyline(ctx, state.overlay, size, COLORS.overlay, 2, [4, 3]);
  drawWorld(ctx, state.world, size);
}

/** Horizontal bar readout of per-object similarity in [-1, 1]. */
export function drawSimilarityBars(
  ctx: Ctx2D,
  labels: string[],
  similarity: number[],
  width: number,
  rowHeight = 18,
): void {
  ctx.clearRect(0, 0, width, rowHeight * Math.max(labels.length, 1));
  ctx.font = "11px sans-serif";
  labels.forEach((label, i) => {
    const value = similarity[i] ?? 0;
    const y = i * rowHeight;
    const mid = width * 0.45;
    ctx.fillStyle = value >= 0 ? "#1f6fd6" : "#c0392b";
    const len = Math.min(Math.abs(value), 1) * mid * 0.9;
    if (value >= 0) ctx.fillRect(mid, y + 4, len, rowHeight - 8);
    else ctx.fillRect(mid - len, y + 4, len, rowHeight - 8);
    ctx.fillStyle = "#222";
    ctx.fillText(`${label} ${value.toFixed(2)}`, 2, y + rowHeight - 5);
  });
}

export interface SweepCell {
  direction: string;
  intensity: string;
  command: string;
}

/** 6x4 grid of miniature direction/intensity decodes. */
export function drawSweepGrid(
  ctx: Ctx2D,
  xiO: Point[],
  entries: SweepEntry[],
  cellSize: number,
  columns = 4,
): SweepCell[] {
  const rows = Math.ceil(entries.length / columns);
  ctx.clearRect(0, 0, columns * cellSize, rows * cellSize);
  const placed: SweepCell[] = [];
  entries.forEach((entry, i) => {
    const cx = (i % columns) * cellSize;
    const cy = Math.floor(i / columns) * cellSize;
    const local = (p: Point): Point => [cx + p[0] * cellSize, cy + (1 - p[1]) * cellSize];
    ctx.strokeStyle = "#ddd";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + cellSize, cy);
    ctx.lineTo(cx + cellSize, cy + cellSize);
    ctx.lineTo(cx, cy + cellSize);
    ctx.stroke();
    for (const [stroke, pts, dash] of [
      [COLORS.original, xiO, [3, 3]],
      [COLORS.current, entry.trajectory, []],
    ] as [string, Point[], number[]][]) {
      ctx.setLineDash(dash);
      ctx.strokeStyle = stroke;
      ctx.beginPath();
      pts.forEach((p, j) => {
        const [x, y] = local(p);
        if (j === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
      ctx.setLineDash([]);
    }
    ctx.fillStyle = "#222";
    ctx.font = "10px sans-serif";
    ctx.fillText(`${entry.direction}/${entry.intensity}`, cx + 3, cy + 11);
    placed.push({ direction: entry.direction, intensity: entry.intensity, command: entry.command });
  });
  return placed;
}
