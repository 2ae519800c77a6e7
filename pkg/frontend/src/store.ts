/** Editor state machine: tools, the operation log, undo-by-replay, overlays.
 *
 * Every mutation is an API-mirrored operation appended to a log; undo replays
 * the shortened log into a fresh session, so client and server state can never
 * diverge.  Orientations shown in overlays always come from the service.
 */

import { ApiClient, ApiError } from "./api.js";
import type {
  FieldSample,
  FitReport,
  GridSpec,
  ModelSummary,
  StrategyName,
} from "./types.js";

export type Tool = "core" | "delta" | "mark" | "anchor";

export const DRAG_DEAD_ZONE_PX = 3;
export const DEFAULT_ANCHOR_SIGMA_FACTOR = 3; // times the grid spacing

export type Operation =
  | { kind: "core"; x: number; y: number }
  | { kind: "delta"; x: number; y: number }
  | { kind: "marks"; marks: { x: number; y: number; theta_deg: number }[] }
  | {
      kind: "anchor";
      a: number;
      b: number;
      theta_deg: number;
      sigma1: number;
      sigma2: number;
      optimize: boolean;
    };

export interface OverlayToggles {
  marks: boolean;
  field: boolean;
  anchors: boolean;
  singularPoints: boolean;
}

/** Undirected drag angle in degrees [0, 180); null inside the dead zone. */
export function dragAngleDeg(
  x0: number,
  y0: number,
  x1: number,
  y1: number,
): number | null {
  const dx = x1 - x0;
  const dy = y1 - y0;
  if (Math.hypot(dx, dy) < DRAG_DEAD_ZONE_PX) return null;
  const deg = (Math.atan2(dy, dx) * 180) / Math.PI;
  return ((deg % 180) + 180) % 180;
}

export class MarkingStore {
  sessionId = "";
  tool: Tool = "mark";
  cores: { x: number; y: number }[] = [];
  deltas: { x: number; y: number }[] = [];
  markCount = 0;
  opLog: Operation[] = [];
  fieldSamples: FieldSample[] = [];
  fieldStale = false;
  report: FitReport | null = null;
  model: ModelSummary | null = null;
  fitRunning = false;
  lastError: string | null = null;
  overlay: OverlayToggles = {
    marks: true,
    field: true,
    anchors: true,
    singularPoints: true,
  };
  fieldStride = 1;
  /** Editable in the toolbar; starts at 3x the grid spacing. */
  anchorSigma: number | null = null;

  constructor(
    private api: ApiClient,
    readonly grid: GridSpec,
  ) {}

  get anchorSigmaDefault(): number {
    return this.anchorSigma ?? DEFAULT_ANCHOR_SIGMA_FACTOR * this.grid.spacing_px;
  }

  async init(image?: Blob): Promise<void> {
    this.sessionId = await this.api.createSession(this.grid, image);
  }

  setTool(tool: Tool): void {
    this.tool = tool;
  }

  toggleOverlay(name: keyof OverlayToggles): void {
    this.overlay[name] = !this.overlay[name];
  }

  private async apply(op: Operation): Promise<void> {
    switch (op.kind) {
      case "core":
      case "delta": {
        const counts = await this.api.addSingularPoint(
          this.sessionId,
          op.kind,
          op.x,
          op.y,
        );
        this.cores = this.cores.slice(0, counts.cores);
        this.deltas = this.deltas.slice(0, counts.deltas);
        if (op.kind === "core") this.cores.push({ x: op.x, y: op.y });
        else this.deltas.push({ x: op.x, y: op.y });
        break;
      }
      case "marks": {
        this.markCount = await this.api.addMarks(this.sessionId, op.marks);
        break;
      }
      case "anchor": {
        this.model = await this.api.addAnchor(this.sessionId, {
          a: op.a,
          b: op.b,
          theta_deg: op.theta_deg,
          sigma1: op.sigma1,
          sigma2: op.sigma2,
          optimize: op.optimize,
        });
        break;
      }
    }
  }

  /** Run one operation; on failure the log and state stay untouched and the
   * error message is surfaced inline. */
  private async tryOp(op: Operation): Promise<boolean> {
    try {
      await this.apply(op);
      this.opLog.push(op);
      this.lastError = null;
      return true;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      return false;
    }
  }

  async placeSingularPoint(kind: "core" | "delta", x: number, y: number): Promise<boolean> {
    return this.tryOp({ kind, x, y });
  }

  async click(x: number, y: number): Promise<boolean> {
    if (this.tool === "core" || this.tool === "delta") {
      return this.placeSingularPoint(this.tool, x, y);
    }
    return false; // mark and anchor tools need a drag
  }

  async drag(x0: number, y0: number, x1: number, y1: number): Promise<boolean> {
    const theta = dragAngleDeg(x0, y0, x1, y1);
    if (theta === null) return false; // dead zone: no mark
    if (this.tool === "mark") {
      return this.tryOp({
        kind: "marks",
        marks: [{ x: x0, y: y0, theta_deg: theta }],
      });
    }
    if (this.tool === "anchor") {
      return this.tryOp({
        kind: "anchor",
        a: x0,
        b: y0,
        theta_deg: theta,
        sigma1: this.anchorSigmaDefault,
        sigma2: this.anchorSigmaDefault,
        optimize: false,
      });
    }
    return false;
  }

  async addMarksBatch(marks: { x: number; y: number; theta_deg: number }[]): Promise<boolean> {
    return this.tryOp({ kind: "marks", marks });
  }

  async runFit(strategy: StrategyName, targetDeg?: number): Promise<boolean> {
    if (this.fitRunning) return false;
    this.fitRunning = true;
    try {
      await this.api.startFit(this.sessionId, strategy, targetDeg);
      const status = await this.api.waitForFit(this.sessionId);
      if (status.status === "failed") {
        this.lastError = status.error ?? "fit failed";
        return false;
      }
      this.report = status.report;
      this.model = status.model;
      this.lastError = null;
      await this.refreshField();
      return true;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      return false;
    } finally {
      this.fitRunning = false;
    }
  }

  async refreshField(): Promise<void> {
    try {
      const field = await this.api.getField(this.sessionId, this.fieldStride);
      this.fieldSamples = field.samples;
      this.fieldStale = field.stale;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.fieldSamples = []; // no model yet
        return;
      }
      throw err;
    }
  }

  /** Undo the last operation by replaying the rest into a fresh session. */
  async undo(): Promise<boolean> {
    if (!this.opLog.length) return false;
    const replay = this.opLog.slice(0, -1);
    const fresh = new MarkingStore(this.api, this.grid);
    await fresh.init();
    for (const op of replay) {
      await fresh.apply(op);
      fresh.opLog.push(op);
    }
    this.sessionId = fresh.sessionId;
    this.cores = fresh.cores;
    this.deltas = fresh.deltas;
    this.markCount = fresh.markCount;
    this.model = fresh.model;
    this.opLog = fresh.opLog;
    this.report = null;
    this.fieldSamples = [];
    this.fieldStale = false;
    this.lastError = null;
    return true;
  }

  async exportModel(): Promise<Uint8Array> {
    return this.api.exportModel(this.sessionId);
  }
}
