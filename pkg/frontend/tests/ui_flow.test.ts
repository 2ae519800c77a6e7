/** Scripted end-to-end flows against a live service (acceptance 8 and 9). */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { MarkingStore, dragAngleDeg } from "../src/store.js";
import {
  startService,
  synthLoopCase,
  parseXqdHeader,
  undirectedDeltaDeg,
  type ServiceHandle,
} from "./helpers.js";

let service: ServiceHandle;

beforeAll(async () => {
  service = await startService();
}, 60_000);

afterAll(() => {
  service?.stop();
});

const GRID = { cols: 12, rows: 12, spacing_px: 12 };

describe("drag angle math", () => {
  it("maps drags to undirected degrees with a dead zone", () => {
    expect(dragAngleDeg(10, 10, 30, 10)).toBe(0); // horizontal
    expect(dragAngleDeg(10, 10, 10, 40)).toBe(90); // vertical
    expect(dragAngleDeg(10, 10, 0, 10)).toBe(0); // opposite direction, same line
    expect(dragAngleDeg(5, 5, 6.5, 6.5)).toBeNull(); // < 3 px dead zone
    const up45 = dragAngleDeg(0, 0, 10, 10);
    expect(up45).toBeCloseTo(45, 6);
  });
});

describe("marking round trip (criterion 8)", () => {
  it(
    "core+delta, 30 drag marks, S2 fit, export decodes and matches truth <= 3 deg",
    async () => {
      const synth = synthLoopCase(41, "12x12@12");
      const api = new ApiClient(service.url);
      const store = new MarkingStore(api, GRID);
      await store.init();

      store.setTool("core");
      expect(await store.click(...synth.coreWorld)).toBe(true);
      store.setTool("delta");
      expect(await store.click(...synth.deltaWorld)).toBe(true);

      // 30 spread-out drag marks taken from the synthetic truth
      const step = Math.floor(synth.truth.cells.length / 30);
      const chosen = synth.truth.cells.filter((_, i) => i % step === 0).slice(0, 30);
      expect(chosen.length).toBe(30);
      store.setTool("mark");
      for (const cell of chosen) {
        const theta = (cell.thetaDeg * Math.PI) / 180;
        const ok = await store.drag(
          cell.x,
          cell.y,
          cell.x + 10 * Math.cos(theta),
          cell.y + 10 * Math.sin(theta),
        );
        expect(ok).toBe(true);
      }
      expect(store.markCount).toBe(30);

      expect(await store.runFit("S2")).toBe(true);
      expect(store.report).not.toBeNull();
      expect(store.report!.anchors_used).toBeLessThanOrEqual(8);
      expect(store.fieldStale).toBe(false);

      // the overlay field comes from the service; compare it to the truth at
      // the marked cells
      const byKey = new Map(
        store.fieldSamples.map((s) => [`${s.x},${s.y}`, s.theta_deg]),
      );
      const diffs = chosen.map((cell) => {
        const got = byKey.get(`${cell.x},${cell.y}`);
        expect(got).toBeDefined();
        return undirectedDeltaDeg(got!, cell.thetaDeg);
      });
      const mean = diffs.reduce((a, b) => a + b, 0) / diffs.length;
      expect(mean).toBeLessThanOrEqual(3.0);

      const bytes = await store.exportModel();
      const header = parseXqdHeader(bytes);
      expect(header.magic).toBe("XQD1");
      expect(header.version).toBe(1);
      expect(header.cores).toBe(1);
      expect(header.deltas).toBe(1);
      const expectedSize =
        17 + 4 * (5 + 2 * (header.cores + header.deltas) + 5 * header.anchors);
      expect(bytes.length).toBe(expectedSize);
    },
    240_000,
  );
});

describe("cardinality guard (criterion 9)", () => {
  it("surfaces the 409 on a third core without corrupting state", async () => {
    const api = new ApiClient(service.url);
    const store = new MarkingStore(api, GRID);
    await store.init();

    store.setTool("core");
    expect(await store.click(30, 30)).toBe(true);
    expect(await store.click(60, 60)).toBe(true);
    const logBefore = store.opLog.length;

    const ok = await store.click(90, 90);
    expect(ok).toBe(false);
    expect(store.lastError).toMatch(/cannot contain more than/);
    expect(store.cores.length).toBe(2);
    expect(store.opLog.length).toBe(logBefore); // nothing recorded

    // the session still works after the rejected placement
    store.setTool("delta");
    expect(await store.click(45, 20)).toBe(true);
    expect(store.deltas.length).toBe(1);
    expect(store.lastError).toBeNull();

    // same guard for deltas
    expect(await store.click(80, 20)).toBe(true);
    expect(await store.click(100, 20)).toBe(false);
    expect(store.deltas.length).toBe(2);
  }, 60_000);
});

describe("undo by replay", () => {
  it("rebuilds the session without the last operation", async () => {
    const api = new ApiClient(service.url);
    const store = new MarkingStore(api, GRID);
    await store.init();
    const firstSession = store.sessionId;

    store.setTool("core");
    await store.click(30, 30);
    store.setTool("mark");
    await store.drag(50, 50, 70, 50);
    await store.drag(60, 60, 60, 90);
    expect(store.markCount).toBe(2);

    expect(await store.undo()).toBe(true);
    expect(store.sessionId).not.toBe(firstSession);
    expect(store.cores.length).toBe(1);
    expect(store.markCount).toBe(1);

    await store.undo();
    await store.undo();
    expect(store.cores.length).toBe(0);
    expect(store.markCount).toBe(0);
    expect(await store.undo()).toBe(false); // nothing left
  }, 60_000);
});

describe("anchor insertion through the UI", () => {
  it("inserting an anchor updates the overlay field near it", async () => {
    const synth = synthLoopCase(43, "12x12@12");
    const api = new ApiClient(service.url);
    const store = new MarkingStore(api, GRID);
    await store.init();
    store.setTool("core");
    await store.click(...synth.coreWorld);
    store.setTool("delta");
    await store.click(...synth.deltaWorld);
    const marks = synth.truth.cells
      .filter((_, i) => i % 7 === 0)
      .slice(0, 20)
      .map((c) => ({ x: c.x, y: c.y, theta_deg: c.thetaDeg }));
    await store.addMarksBatch(marks);
    await store.runFit("S1");
    expect(store.model).not.toBeNull();

    const cell = synth.truth.cells[60];
    const target = (cell.thetaDeg + 70) % 180;
    store.setTool("anchor");
    const theta = (target * Math.PI) / 180;
    const ok = await store.drag(
      cell.x,
      cell.y,
      cell.x + 12 * Math.cos(theta),
      cell.y + 12 * Math.sin(theta),
    );
    expect(ok).toBe(true);
    expect(store.model!.anchors).toBeGreaterThanOrEqual(1);

    await store.refreshField();
    const sample = store.fieldSamples.find((s) => s.x === cell.x && s.y === cell.y);
    expect(sample).toBeDefined();
    expect(undirectedDeltaDeg(sample!.theta_deg, target)).toBeLessThan(1.0);
  }, 120_000);
});
