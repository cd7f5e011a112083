import { describe, expect, it } from "vitest";
import { drawPolyline, drawScene, drawSweepGrid, toCanvas } from "../src/draw.js";
import { initialState, sceneCreated } from "../src/state.js";
import type { Ctx2D } from "../src/draw.js";
import type { Point, SweepEntry, WorldDoc } from "../src/types.js";

class RecordingCtx implements Ctx2D {
  calls: [string, ...unknown[]][] = [];
  strokeStyle: string = "";
  fillStyle: string = "";
  lineWidth = 1;
  font = "";
  globalAlpha = 1;
  clearRect(...a: number[]) { this.calls.push(["clearRect", ...a]); }
  beginPath() { this.calls.push(["beginPath"]); }
  moveTo(x: number, y: number) { this.calls.push(["moveTo", x, y]); }
  lineTo(x: number, y: number) { this.calls.push(["lineTo", x, y]); }
  stroke() { this.calls.push(["stroke"]); }
  arc(...a: number[]) { this.calls.push(["arc", ...a]); }
  fill() { this.calls.push(["fill"]); }
  fillRect(...a: number[]) { this.calls.push(["fillRect", ...a]); }
  fillText(t: string, x: number, y: number) { this.calls.push(["fillText", t, x, y]); }
  setLineDash(s: number[]) { this.calls.push(["setLineDash", s]); }
  count(name: string) { return this.calls.filter((c) => c[0] === name).length; }
}

describe("coordinate mapping", () => {
  it("flips Y so +Y (back) renders upward", () => {
    expect(toCanvas([0, 0], 100)).toEqual([0, 100]); // workspace origin: bottom-left
    expect(toCanvas([1, 1], 100)).toEqual([100, 0]); // far corner: top-right
    expect(toCanvas([0.5, 0.75], 200)).toEqual([100, 50]);
  });
});

describe("polyline rendering", () => {
  it("draws exactly the given server waypoints", () => {
    const ctx = new RecordingCtx();
    const pts: Point[] = Array.from({ length: 100 }, (_, i) => [i / 99, 0.5]);
    drawPolyline(ctx, pts, 100, "#000");
    expect(ctx.count("moveTo")).toBe(1);
    expect(ctx.count("lineTo")).toBe(99); // 100 points pass through untouched
  });

  it("empty input draws nothing", () => {
    const ctx = new RecordingCtx();
    drawPolyline(ctx, [], 100, "#000");
    expect(ctx.calls).toHaveLength(0);
  });
});

describe("scene rendering", () => {
  const world: WorldDoc = {
    start: [0.1, 0.1],
    goal: [0.9, 0.9],
    objects: [{ label: "glass", pos: [0.5, 0.5] }, { label: "cup", pos: [0.3, 0.7] }],
  };

  it("labels every object and draws all layers", () => {
    const ctx = new RecordingCtx();
    const traj: Point[] = [[0.1, 0.1], [0.9, 0.9]];
    let state = sceneCreated(initialState(), "id", "oracle", world, traj);
    state = { ...state, ghost: traj, overlay: traj };
    drawScene(ctx, state, 100);
    const texts = ctx.calls.filter((c) => c[0] === "fillText").map((c) => c[1]);
    expect(texts).toContain("glass");
    expect(texts).toContain("cup");
    // strokes: original + ghost + current + overlay = 4 polylines
    expect(ctx.count("stroke")).toBe(4);
  });

  it("clears before drawing and survives an empty state", () => {
    const ctx = new RecordingCtx();
    drawScene(ctx, initialState(), 100);
    expect(ctx.calls[0][0]).toBe("clearRect");
    expect(ctx.count("stroke")).toBe(0);
  });
});

describe("sweep grid", () => {
  it("renders all 24 direction/intensity cells", () => {
    const ctx = new RecordingCtx();
    const xiO: Point[] = [[0.1, 0.1], [0.9, 0.9]];
    const entries: SweepEntry[] = [];
    for (const d of ["closer", "further", "left", "right", "front", "back"]) {
      for (const i of ["slight", "neutral", "strong", "very_strong"]) {
        entries.push({ split: "train", direction: d, intensity: i, command: "",
                       trajectory: xiO });
      }
    }
    const placed = drawSweepGrid(ctx, xiO, entries, 100, 4);
    expect(placed).toHaveLength(24);
    const labels = ctx.calls.filter((c) => c[0] === "fillText");
    expect(labels).toHaveLength(24);
  });
});
