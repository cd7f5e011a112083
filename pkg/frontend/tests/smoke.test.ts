// Headless UI smoke: drive the real page wiring (real index.html, real event
// handlers) inside jsdom, with canvas contexts replaced by recording stubs
// and fetch answered by a scripted server double that mimics the session API.
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { JSDOM } from "jsdom";
import { beforeEach, describe, expect, it, vi } from "vitest";
import { ApiClient } from "../src/api.js";
import { setup } from "../src/main.js";
import type { Point } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const html = readFileSync(join(here, "..", "index.html"), "utf-8");

class RecordingCtx {
  calls: [string, ...unknown[]][] = [];
  strokeStyle = "";
  fillStyle = "";
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
  setLineDash(_s: number[]) { this.calls.push(["setLineDash"]); }
  polylineSizes(): number[] {
    // consecutive moveTo..lineTo runs = drawn polylines with their point counts
    const sizes: number[] = [];
    let run = 0;
    for (const c of this.calls) {
      if (c[0] === "moveTo") run = 1;
      else if (c[0] === "lineTo") run += 1;
      else if (c[0] === "stroke" && run > 1) {
        sizes.push(run);
        run = 0;
      }
    }
    return sizes;
  }
  reset() { this.calls = []; }
}

function line(n: number, y: number): Point[] {
  return Array.from({ length: n }, (_, i) => [i / (n - 1), y]);
}

// scripted server double implementing the session contract
function makeServer() {
  const xiO = line(100, 0.4);
  const reshaped = line(100, 0.6);
  const history: Point[][] = [xiO];
  return {
    history,
    fetch: vi.fn(async (url: string, init?: { method?: string; body?: string }) => {
      const ok = (doc: unknown) => ({ ok: true, status: 200, statusText: "ok",
                                      json: async () => doc });
      const err = (status: number, reason: string) => ({
        ok: false, status, statusText: "err", json: async () => ({ error: reason }) });
      if (url.endsWith("/api/v1/session") && init?.method === "POST") {
        return ok({ id: "s1", engine: "oracle",
                    world: { start: xiO[0], goal: xiO[99],
                             objects: [{ label: "glass", pos: [0.5, 0.55] }] },
                    trajectory: xiO });
      }
      if (url.endsWith("/command")) {
        const { text } = JSON.parse(init!.body!);
        if (!/glass/.test(text)) return err(422, "no object label found");
        history.push(reshaped);
        return ok({ trajectory: reshaped, similarity: [0.91], engine: "oracle",
                    elapsed_ms: 7.5 });
      }
      if (url.endsWith("/undo")) {
        if (history.length <= 1) return err(409, "cannot undo past the original");
        history.pop();
        return ok({ trajectory: history[history.length - 1],
                    history_length: history.length });
      }
      if (url.endsWith("/sweep")) {
        const grid = [];
        for (const d of ["closer", "further", "left", "right", "front", "back"]) {
          for (const i of ["slight", "neutral", "strong", "very_strong"]) {
            grid.push({ split: "train", direction: d, intensity: i,
                        command: `cmd ${d} ${i}`, trajectory: reshaped });
          }
        }
        return ok({ target: 0, label: "glass", xi_o: xiO, grid });
      }
      return err(404, `unexpected ${url}`);
    }),
  };
}

function bootPage() {
  const dom = new JSDOM(html, { url: "http://localhost/" });
  const doc = dom.window.document;
  const contexts = new Map<string, RecordingCtx>();
  for (const id of ["scene", "similarity", "sweep"]) {
    const canvas = doc.getElementById(id) as HTMLCanvasElement;
    const ctx = new RecordingCtx();
    contexts.set(id, ctx);
    (canvas as unknown as { getContext: () => unknown }).getContext = () => ctx;
  }
  return { dom, doc, contexts };
}

const tick = () => new Promise((r) => setTimeout(r, 0));

describe("UI smoke", () => {
  let server: ReturnType<typeof makeServer>;

  beforeEach(() => {
    server = makeServer();
    vi.stubGlobal("fetch", server.fetch);
  });

  it("create scene -> command -> redraw -> undo restores", async () => {
    const { doc, contexts } = bootPage();
    const app = setup(doc, new ApiClient());
    const scene = contexts.get("scene")!;

    (doc.getElementById("new-scene") as HTMLButtonElement).click();
    await tick();
    expect(app.getState().sessionId).toBe("s1");
    expect(scene.polylineSizes()).toContain(100); // original trajectory drawn

    const input = doc.getElementById("command") as HTMLInputElement;
    input.value = "stay further away from the glass";
    scene.reset();
    (doc.getElementById("send") as HTMLButtonElement).click();
    await tick();

    const state = app.getState();
    expect(state.log).toHaveLength(1); // history entry appended
    expect(state.current).toHaveLength(100);
    expect(state.current![50][1]).toBeCloseTo(0.6); // redrawn with the new points
    const sizes = scene.polylineSizes();
    expect(sizes.filter((s) => s === 100).length).toBeGreaterThanOrEqual(2); // current + ghost
    const logText = doc.getElementById("log")!.textContent;
    expect(logText).toContain("stay further away from the glass");

    const before = app.getState().ghost;
    (doc.getElementById("undo") as HTMLButtonElement).click();
    await tick();
    expect(app.getState().current).toEqual(before); // prior drawing restored
    expect(app.getState().log).toHaveLength(0);
    expect((doc.getElementById("undo") as HTMLButtonElement).disabled).toBe(true);
  });

  it("server 422 shows the error banner and keeps state", async () => {
    const { doc } = bootPage();
    const app = setup(doc, new ApiClient());
    (doc.getElementById("new-scene") as HTMLButtonElement).click();
    await tick();
    const current = app.getState().current;

    const input = doc.getElementById("command") as HTMLInputElement;
    input.value = "do something impossible";
    (doc.getElementById("send") as HTMLButtonElement).click();
    await tick();

    expect(app.getState().error).toContain("422");
    expect(app.getState().current).toEqual(current);
    const banner = doc.getElementById("error") as HTMLElement;
    expect(banner.style.display).toBe("block");
    expect(banner.textContent).toContain("no object label found");
  });

  it("undo button is disabled at the history floor", async () => {
    const { doc } = bootPage();
    setup(doc, new ApiClient());
    (doc.getElementById("new-scene") as HTMLButtonElement).click();
    await tick();
    const undo = doc.getElementById("undo") as HTMLButtonElement;
    expect(undo.disabled).toBe(true);
    // a disabled button never issues the request
    undo.click();
    await tick();
    const undoCalls = server.fetch.mock.calls.filter((c) => String(c[0]).endsWith("/undo"));
    expect(undoCalls).toHaveLength(0);
  });

  it("sweep panel renders the 6x4 grid", async () => {
    const { doc, contexts } = bootPage();
    setup(doc, new ApiClient());
    (doc.getElementById("new-scene") as HTMLButtonElement).click();
    await tick();
    (doc.getElementById("sweep-btn") as HTMLButtonElement).click();
    await tick();
    const sweep = contexts.get("sweep")!;
    const cells = sweep.calls.filter((c) => c[0] === "fillText");
    expect(cells).toHaveLength(24);
  });
});
