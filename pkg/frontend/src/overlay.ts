/** Canvas drawing for the marking tool.
 *
 * World coordinates put y up; the canvas puts y down, so all drawing goes
 * through a flip.  Field samples are short segments (matching the service's
 * own renderer); anchors are red, cores circles, deltas triangles.
 */

import type { MarkingStore } from "./store.js";

export interface ViewTransform {
  canvasHeight: number;
  zoom: number;
  panX: number;
  panY: number;
}

export function worldToCanvas(
  view: ViewTransform,
  x: number,
  y: number,
): [number, number] {
  return [(x + view.panX) * view.zoom, (view.canvasHeight - (y + view.panY)) * view.zoom];
}

export function canvasToWorld(
  view: ViewTransform,
  cx: number,
  cy: number,
): [number, number] {
  return [cx / view.zoom - view.panX, view.canvasHeight - cy / view.zoom - view.panY];
}

function segment(
  ctx: CanvasRenderingContext2D,
  view: ViewTransform,
  x: number,
  y: number,
  thetaDeg: number,
  length: number,
): void {
  const theta = (thetaDeg * Math.PI) / 180;
  const dx = (length / 2) * Math.cos(theta);
  const dy = (length / 2) * Math.sin(theta);
  const [x1, y1] = worldToCanvas(view, x - dx, y - dy);
  const [x2, y2] = worldToCanvas(view, x + dx, y + dy);
  ctx.beginPath();
  ctx.moveTo(x1, y1);
  ctx.lineTo(x2, y2);
  ctx.stroke();
}

export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  store: MarkingStore,
  view: ViewTransform,
  marks: { x: number; y: number; theta_deg: number }[],
  anchors: { a: number; b: number; theta_deg: number }[],
): void {
  const spacing = store.grid.spacing_px;

  if (store.overlay.field) {
    ctx.strokeStyle = store.fieldStale ? "#9aa" : "#226";
    ctx.lineWidth = 1;
    for (const s of store.fieldSamples) {
      segment(ctx, view, s.x, s.y, s.theta_deg, 0.8 * spacing * store.fieldStride);
    }
  }

  if (store.overlay.marks) {
    ctx.strokeStyle = "#0a0";
    ctx.lineWidth = 2;
    for (const m of marks) {
      segment(ctx, view, m.x, m.y, m.theta_deg, 0.9 * spacing);
    }
  }

  if (store.overlay.anchors) {
    ctx.strokeStyle = "#c00"; // anchors draw in red
    ctx.lineWidth = 2;
    for (const a of anchors) {
      segment(ctx, view, a.a, a.b, a.theta_deg, 1.2 * spacing);
      const [cx, cy] = worldToCanvas(view, a.a, a.b);
      ctx.beginPath();
      ctx.arc(cx, cy, 3, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }

  if (store.overlay.singularPoints) {
    ctx.lineWidth = 2;
    ctx.strokeStyle = "#c00";
    for (const c of store.cores) {
      const [cx, cy] = worldToCanvas(view, c.x, c.y);
      ctx.beginPath();
      ctx.arc(cx, cy, 0.5 * spacing * view.zoom, 0, 2 * Math.PI);
      ctx.stroke();
    }
    ctx.strokeStyle = "#06c";
    for (const d of store.deltas) {
      const [cx, cy] = worldToCanvas(view, d.x, d.y);
      const r = 0.5 * spacing * view.zoom;
      ctx.beginPath();
      for (let k = 0; k < 3; k++) {
        const ang = -Math.PI / 2 + (2 * Math.PI * k) / 3;
        const px = cx + r * Math.cos(ang);
        const py = cy + r * Math.sin(ang);
        if (k === 0) ctx.moveTo(px, py);
        else ctx.lineTo(px, py);
      }
      ctx.closePath();
      ctx.stroke();
    }
  }
}
