import { describe, expect, it } from "vitest";
import {
  canSubmit,
  canUndo,
  commandApplied,
  failed,
  initialState,
  lastCommand,
  otherEngine,
  sceneCreated,
  undone,
} from "../src/state.js";
import type { Point, WorldDoc } from "../src/types.js";

const world: WorldDoc = {
  start: [0.1, 0.1],
  goal: [0.9, 0.9],
  objects: [{ label: "glass", pos: [0.5, 0.5] }],
};

const trajA: Point[] = [[0.1, 0.1], [0.5, 0.5], [0.9, 0.9]];
const trajB: Point[] = [[0.1, 0.1], [0.4, 0.6], [0.9, 0.9]];

describe("view state transitions", () => {
  it("starts without a session and cannot act", () => {
    const s = initialState();
    expect(canSubmit(s)).toBe(false);
    expect(canUndo(s)).toBe(false);
  });

  it("scene creation resets everything and enables submit", () => {
    const s = sceneCreated(initialState(), "id1", "oracle", world, trajA);
    expect(s.current).toEqual(trajA);
    expect(s.original).toEqual(trajA);
    expect(canSubmit(s)).toBe(true);
    expect(canUndo(s)).toBe(false); // history floor
  });

  it("command pushes log and moves current to ghost", () => {
    let s = sceneCreated(initialState(), "id1", "oracle", world, trajA);
    s = commandApplied(s, "go closer to the glass", trajB, [0.8], "oracle", 12);
    expect(s.current).toEqual(trajB);
    expect(s.ghost).toEqual(trajA);
    expect(s.log).toHaveLength(1);
    expect(lastCommand(s)!.command).toBe("go closer to the glass");
    expect(canUndo(s)).toBe(true);
  });

  it("undo restores the previous drawing and trims the log", () => {
    let s = sceneCreated(initialState(), "id1", "oracle", world, trajA);
    s = commandApplied(s, "cmd", trajB, [0.5], "oracle", 5);
    s = undone(s, trajA, 1);
    expect(s.current).toEqual(trajA);
    expect(s.log).toHaveLength(0);
    expect(canUndo(s)).toBe(false);
  });

  it("failure sets the banner and keeps the drawing", () => {
    let s = sceneCreated(initialState(), "id1", "oracle", world, trajA);
    s = failed(s, "422: no direction phrase");
    expect(s.error).toContain("422");
    expect(s.current).toEqual(trajA);
  });

  it("pending blocks submit and undo", () => {
    let s = sceneCreated(initialState(), "id1", "oracle", world, trajA);
    s = commandApplied(s, "cmd", trajB, [], "oracle", 5);
    s = { ...s, pending: true };
    expect(canSubmit(s)).toBe(false);
    expect(canUndo(s)).toBe(false);
  });

  it("engine toggling helper flips", () => {
    expect(otherEngine("model")).toBe("oracle");
    expect(otherEngine("oracle")).toBe("model");
  });
});
