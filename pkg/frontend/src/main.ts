/** Browser entry point: DOM wiring around the store and overlay renderer. */

import { ApiClient } from "./api.js";
import { canvasToWorld, drawOverlay, type ViewTransform } from "./overlay.js";
import { MarkingStore, type Tool } from "./store.js";
import type { StrategyName } from "./types.js";

const SERVICE_URL =
  new URLSearchParams(window.location.search).get("service") ??
  "http://127.0.0.1:8707";

const GRID = { cols: 40, rows: 40, spacing_px: 12 };

const canvas = document.getElementById("board") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const panelEl = document.getElementById("panel")!;

const api = new ApiClient(SERVICE_URL);
const store = new MarkingStore(api, GRID);
const view: ViewTransform = {
  canvasHeight: GRID.rows * GRID.spacing_px,
  zoom: canvas.width / (GRID.cols * GRID.spacing_px),
  panX: 0,
  panY: 0,
};

const localMarks: { x: number; y: number; theta_deg: number }[] = [];
const localAnchors: { a: number; b: number; theta_deg: number }[] = [];
let background: HTMLImageElement | null = null;

function redraw(): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (background) {
    ctx.drawImage(background, 0, 0, canvas.width, canvas.height);
    ctx.fillStyle = "rgba(255,255,255,0.55)";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
  }
  drawOverlay(ctx, store, view, localMarks, localAnchors);
  const bits = [
    `tool: ${store.tool}`,
    `cores ${store.cores.length}/2, deltas ${store.deltas.length}/2`,
    `marks ${store.markCount}`,
  ];
  if (store.fieldStale) bits.push("field: STALE");
  if (store.lastError) bits.push(`error: ${store.lastError}`);
  statusEl.textContent = bits.join("  |  ");
  if (store.report) {
    panelEl.textContent =
      `deviation ${store.report.deviation_deg.toFixed(2)} deg, ` +
      `${store.report.anchors_used} anchors, ` +
      `${store.report.wall_time_s.toFixed(1)} s` +
      (store.model ? `, ${store.model.encoded_bytes} bytes` : "");
  }
}

let dragStart: [number, number] | null = null;

canvas.addEventListener("mousedown", (ev) => {
  const rect = canvas.getBoundingClientRect();
  dragStart = canvasToWorld(view, ev.clientX - rect.left, ev.clientY - rect.top);
});

canvas.addEventListener("mouseup", async (ev) => {
  if (!dragStart) return;
  const rect = canvas.getBoundingClientRect();
  const [x1, y1] = canvasToWorld(view, ev.clientX - rect.left, ev.clientY - rect.top);
  const [x0, y0] = dragStart;
  dragStart = null;
  if (store.tool === "core" || store.tool === "delta") {
    await store.click(x0, y0);
  } else {
    const moved = await store.drag(x0, y0, x1, y1);
    if (moved && !store.lastError) {
      if (store.tool === "mark") {
        const theta = (Math.atan2(y1 - y0, x1 - x0) * 180) / Math.PI;
        localMarks.push({ x: x0, y: y0, theta_deg: ((theta % 180) + 180) % 180 });
      } else if (store.tool === "anchor") {
        const theta = (Math.atan2(y1 - y0, x1 - x0) * 180) / Math.PI;
        localAnchors.push({ a: x0, b: y0, theta_deg: ((theta % 180) + 180) % 180 });
        await store.refreshField();
      }
    }
  }
  redraw();
});

for (const tool of ["core", "delta", "mark", "anchor"] as Tool[]) {
  document.getElementById(`tool-${tool}`)?.addEventListener("click", () => {
    store.setTool(tool);
    redraw();
  });
}

document.getElementById("run-fit")?.addEventListener("click", async () => {
  const select = document.getElementById("strategy") as HTMLSelectElement;
  statusEl.textContent = "fitting...";
  await store.runFit(select.value as StrategyName);
  redraw();
});

document.getElementById("undo")?.addEventListener("click", async () => {
  await store.undo();
  localMarks.length = 0;
  localAnchors.length = 0;
  await store.refreshField().catch(() => undefined);
  redraw();
});

document.getElementById("export")?.addEventListener("click", async () => {
  try {
    const bytes = await store.exportModel();
    const blob = new Blob([bytes.slice()], { type: "application/octet-stream" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "field.xqd";
    link.click();
    URL.revokeObjectURL(link.href);
  } catch (err) {
    store.lastError = err instanceof Error ? err.message : String(err);
    redraw();
  }
});

document.getElementById("sigma-input")?.addEventListener("change", (ev) => {
  const value = Number((ev.target as HTMLInputElement).value);
  store.anchorSigma = Number.isFinite(value) && value > 0 ? value : null;
});

document.getElementById("stride")?.addEventListener("change", async (ev) => {
  store.fieldStride = Number((ev.target as HTMLSelectElement).value) || 1;
  await store.refreshField().catch(() => undefined);
  redraw();
});

document.getElementById("image-input")?.addEventListener("change", (ev) => {
  const input = ev.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  const img = new Image();
  img.onload = () => {
    background = img;
    redraw();
  };
  img.src = URL.createObjectURL(file);
});

store
  .init()
  .then(() => redraw())
  .catch((err) => {
    statusEl.textContent = `cannot reach service at ${SERVICE_URL}: ${err}`;
  });
