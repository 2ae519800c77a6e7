/** Test utilities: spawn the Python service, parse .xof text, read .xqd headers. */

import { spawn, execFileSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

export const REPO_ROOT = resolve(dirname(fileURLToPath(import.meta.url)), "..", "..");

export interface ServiceHandle {
  url: string;
  stop: () => void;
}

export async function startService(): Promise<ServiceHandle> {
  const port = 20000 + Math.floor(Math.random() * 20000);
  const url = `http://127.0.0.1:${port}`;
  const child: ChildProcess = spawn(
    "python3",
    ["-m", "xqdof.cli", "serve", "--host", "127.0.0.1", "--port", String(port)],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  child.stderr?.on("data", (chunk) => {
    stderr += String(chunk);
  });
  const deadline = Date.now() + 30_000;
  for (;;) {
    if (child.exitCode !== null) {
      throw new Error(`service exited early (${child.exitCode}): ${stderr}`);
    }
    try {
      const res = await fetch(`${url}/healthz`);
      if (res.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      child.kill();
      throw new Error(`service did not come up: ${stderr}`);
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  return { url, stop: () => child.kill() };
}

export interface XofCell {
  x: number;
  y: number;
  thetaDeg: number;
}

export interface XofGrid {
  cols: number;
  rows: number;
  spacingPx: number;
  cells: XofCell[]; // foreground only, row-major
}

export function parseXof(text: string): XofGrid {
  const lines = text.trim().split(/\r?\n/);
  const header = lines[0].split(/\s+/);
  if (header[0] !== "XOF1") throw new Error(`bad header: ${lines[0]}`);
  const cols = Number(header[1]);
  const rows = Number(header[2]);
  const spacing = Number(header[3]);
  const cells: XofCell[] = [];
  const tokens = lines.slice(1).flatMap((line) => line.split(/\s+/));
  if (tokens.length !== rows * cols) throw new Error("token count mismatch");
  tokens.forEach((tok, idx) => {
    if (tok === "*") return;
    const r = Math.floor(idx / cols);
    const c = idx % cols;
    cells.push({
      x: spacing / 2 + c * spacing,
      y: spacing / 2 + r * spacing,
      thetaDeg: Number(tok),
    });
  });
  return { cols, rows, spacingPx: spacing, cells };
}

export interface XqdHeader {
  magic: string;
  version: number;
  cores: number;
  deltas: number;
  anchors: number;
  imageWidthPx: number;
  imageHeightPx: number;
  gridSpacingPx: number;
  weightKind: number;
}

export function parseXqdHeader(data: Uint8Array): XqdHeader {
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  return {
    magic: String.fromCharCode(data[0], data[1], data[2], data[3]),
    version: view.getUint8(4),
    cores: view.getUint8(5),
    deltas: view.getUint8(6),
    anchors: view.getUint16(7, true),
    imageWidthPx: view.getUint16(9, true),
    imageHeightPx: view.getUint16(11, true),
    gridSpacingPx: view.getUint8(13),
    weightKind: view.getUint8(14),
  };
}

export interface SynthCase {
  truth: XofGrid;
  coreWorld: [number, number];
  deltaWorld: [number, number];
}

/** Build a synthetic loop ground truth via the CLI and return its foreground
 * cells together with the generator's singular-point world positions. */
export function synthLoopCase(seed: number, grid: string): SynthCase {
  const dir = mkdtempSync(join(tmpdir(), "xqdof-ui-"));
  const truthPath = join(dir, "truth.xof");
  const modelPath = join(dir, "model.xqd");
  const jsonPath = join(dir, "model.json");
  execFileSync(
    "python3",
    ["-m", "xqdof.cli", "synth", "--preset", "loop", "--anchors", "2",
     "--seed", String(seed), "--grid", grid,
     "--out-truth", truthPath, "--out-model", modelPath],
    { cwd: REPO_ROOT },
  );
  execFileSync(
    "python3",
    ["-m", "xqdof.cli", "decode", "--in", modelPath, "--out", jsonPath],
    { cwd: REPO_ROOT },
  );
  const doc = JSON.parse(readFileSync(jsonPath, "utf-8"));
  const qd = doc.qd;
  const toWorld = (re: number, im: number): [number, number] => {
    const u = re;
    const v = im / qd.lambda;
    const c = Math.cos(qd.rotation);
    const s = Math.sin(qd.rotation);
    return [
      qd.translation[0] + c * u - s * v,
      qd.translation[1] + s * u + c * v,
    ];
  };
  return {
    truth: parseXof(readFileSync(truthPath, "utf-8")),
    coreWorld: toWorld(qd.cores[0][0], qd.cores[0][1]),
    deltaWorld: toWorld(qd.deltas[0][0], qd.deltas[0][1]),
  };
}

export function undirectedDeltaDeg(a: number, b: number): number {
  const d = Math.abs(((a - b) % 180) + 180) % 180;
  return Math.min(d, 180 - d);
}
