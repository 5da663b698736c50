import type { StageInput, TrajectoryDoc } from "./types.js";

/** Editor-side model of one bandwidth stage. Values are kept as entered. */
export interface StageRow {
  bandwidth_kbps: number;
  duration_s: number;
  delay_ms: number;
  loss_pct: number;
}

export interface EditorState {
  repeat: "clamp" | "cycle";
  stages: StageRow[];
}

const DEFAULTS = { delay_ms: 0, loss_pct: 0 };

export function parseTrajectory(text: string): EditorState {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    throw new Error(`not valid JSON: ${(e as Error).message}`);
  }
  return fromDoc(doc as TrajectoryDoc);
}

export function fromDoc(doc: TrajectoryDoc): EditorState {
  if (doc.trajectory_version !== 1) {
    throw new Error(`unsupported trajectory_version: ${doc.trajectory_version}`);
  }
  if (doc.repeat !== "clamp" && doc.repeat !== "cycle") {
    throw new Error(`repeat must be "clamp" or "cycle", got ${JSON.stringify(doc.repeat)}`);
  }
  if (!Array.isArray(doc.stages) || doc.stages.length === 0) {
    throw new Error("stages must be a non-empty array");
  }
  const stages = doc.stages.map((s, i) => normalizeStage(s, i));
  return { repeat: doc.repeat, stages };
}

function normalizeStage(s: StageInput, index: number): StageRow {
  const row = { ...DEFAULTS, ...s };
  for (const err of stageErrors(row)) {
    throw new Error(`stage ${index}: ${err}`);
  }
  return row;
}

/** Per-field validation messages for one stage; empty when the stage is valid. */
export function stageErrors(s: StageRow): string[] {
  const errs: string[] = [];
  if (!Number.isFinite(s.bandwidth_kbps) || s.bandwidth_kbps <= 0) {
    errs.push("bandwidth_kbps must be > 0");
  }
  if (!Number.isFinite(s.duration_s) || s.duration_s <= 0) {
    errs.push("duration_s must be > 0");
  }
  if (!Number.isFinite(s.delay_ms) || s.delay_ms < 0) {
    errs.push("delay_ms must be >= 0");
  }
  if (!Number.isFinite(s.loss_pct) || s.loss_pct < 0 || s.loss_pct >= 100) {
    errs.push("loss_pct must be in [0, 100)");
  }
  return errs;
}

export function validate(state: EditorState): string[] {
  const errs: string[] = [];
  if (state.stages.length === 0) errs.push("at least one stage is required");
  state.stages.forEach((s, i) => {
    for (const e of stageErrors(s)) errs.push(`stage ${i}: ${e}`);
  });
  return errs;
}

/**
 * Serialize back to the on-disk schema. Field order matches the files the
 * backend writes, so an unedited load/save round-trips byte-for-byte (modulo
 * JSON whitespace).
 */
export function toDoc(state: EditorState): TrajectoryDoc {
  return {
    trajectory_version: 1,
    repeat: state.repeat,
    stages: state.stages.map((s) => ({
      bandwidth_kbps: s.bandwidth_kbps,
      duration_s: s.duration_s,
      delay_ms: s.delay_ms,
      loss_pct: s.loss_pct,
    })),
  };
}

export function totalDuration(state: EditorState): number {
  return state.stages.reduce((acc, s) => acc + s.duration_s, 0);
}

/**
 * Step-function preview of bandwidth over time as an SVG path, mapped into a
 * width x height viewport with a small top margin so the peak is not clipped.
 */
export function previewPath(state: EditorState, width = 600, height = 160): string {
  const total = totalDuration(state);
  const peak = Math.max(...state.stages.map((s) => s.bandwidth_kbps));
  if (total <= 0 || peak <= 0) return "";
  const x = (t: number) => (t / total) * width;
  const y = (kbps: number) => height - (kbps / peak) * (height - 8);
  let t = 0;
  const parts: string[] = [];
  for (const s of state.stages) {
    const yv = y(s.bandwidth_kbps);
    parts.push(`${parts.length ? "L" : "M"} ${x(t).toFixed(1)} ${yv.toFixed(1)}`);
    t += s.duration_s;
    parts.push(`L ${x(t).toFixed(1)} ${yv.toFixed(1)}`);
  }
  return parts.join(" ");
}
