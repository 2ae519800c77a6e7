/** Thin typed client for the marking service; every UI action goes through it. */

import type {
  AnchorRequest,
  FieldResponse,
  FitStatus,
  GridSpec,
  MarkDeg,
  ModelSummary,
  SingularKind,
  StrategyName,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function parseError(res: Response): Promise<ApiError> {
  let message = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (body && typeof body.error === "string") message = body.error;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(res.status, message);
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.url(path), init);
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as T;
  }

  async health(): Promise<boolean> {
    try {
      const res = await fetch(this.url("/healthz"));
      return res.ok;
    } catch {
      return false;
    }
  }

  async createSession(grid: GridSpec, image?: Blob): Promise<string> {
    let init: RequestInit;
    if (image) {
      const form = new FormData();
      form.append("grid", JSON.stringify(grid));
      form.append("image", image);
      init = { method: "POST", body: form };
    } else {
      init = {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ grid }),
      };
    }
    const doc = await this.json<{ id: string }>("/sessions", init);
    return doc.id;
  }

  async addSingularPoint(
    sessionId: string,
    kind: SingularKind,
    x: number,
    y: number,
  ): Promise<{ cores: number; deltas: number }> {
    return this.json(`/sessions/${sessionId}/singular-points`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind, x, y }),
    });
  }

  async addMarks(sessionId: string, marks: MarkDeg[]): Promise<number> {
    const doc = await this.json<{ marks: number }>(`/sessions/${sessionId}/marks`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(marks),
    });
    return doc.marks;
  }

  async startFit(
    sessionId: string,
    strategy: StrategyName,
    targetDeg?: number,
  ): Promise<void> {
    await this.json(`/sessions/${sessionId}/fit`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ strategy, target_deg: targetDeg ?? null }),
    });
  }

  async fitStatus(sessionId: string): Promise<FitStatus> {
    return this.json(`/sessions/${sessionId}/fit`);
  }

  /** Poll until the running fit finishes; resolves with the final status. */
  async waitForFit(
    sessionId: string,
    timeoutMs = 300_000,
    intervalMs = 150,
  ): Promise<FitStatus> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const status = await this.fitStatus(sessionId);
      if (status.status === "done" || status.status === "failed") return status;
      if (Date.now() > deadline) throw new Error("fit polling timed out");
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }

  async getField(sessionId: string, stride = 1): Promise<FieldResponse> {
    return this.json(`/sessions/${sessionId}/field?stride=${stride}`);
  }

  async addAnchor(sessionId: string, anchor: AnchorRequest): Promise<ModelSummary> {
    const doc = await this.json<{ model: ModelSummary }>(
      `/sessions/${sessionId}/anchors`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(anchor),
      },
    );
    return doc.model;
  }

  async exportModel(sessionId: string): Promise<Uint8Array> {
    const res = await fetch(this.url(`/sessions/${sessionId}/export`));
    if (!res.ok) throw await parseError(res);
    return new Uint8Array(await res.arrayBuffer());
  }
}
