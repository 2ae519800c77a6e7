/** Wire types shared with the marking service (degrees on the wire). */

export interface GridSpec {
  cols: number;
  rows: number;
  spacing_px: number;
  origin_px?: [number, number];
}

export interface Point {
  x: number;
  y: number;
}

export interface MarkDeg extends Point {
  theta_deg: number;
}

export interface AnchorRequest {
  a: number;
  b: number;
  theta_deg: number;
  sigma1?: number;
  sigma2?: number;
  optimize?: boolean;
}

export interface FieldSample extends Point {
  theta_deg: number;
}

export interface FieldResponse {
  stale: boolean;
  samples: FieldSample[];
}

export interface FitReport {
  final_objective: number;
  deviation_deg: number;
  anchors_used: number;
  iterations: number;
  wall_time_s: number;
  objective_trace: number[];
  warnings: string[];
  strategy?: string;
}

export interface ModelSummary {
  anchors: number;
  cores: number;
  deltas: number;
  parameter_count: number;
  encoded_bytes: number;
  stale: boolean;
}

export interface FitStatus {
  status: "none" | "running" | "done" | "failed";
  report: FitReport | null;
  error: string | null;
  model: ModelSummary | null;
}

export type SingularKind = "core" | "delta";

export type StrategyName = "S1" | "S2" | "S3" | "S4";
