import type { TelemetryItem } from "./types.js";

/**
 * Accumulated telemetry for one run: buffer level over time, per-segment
 * bitrate steps, and stall intervals. Fed incrementally from polling deltas.
 */
export interface RunTrace {
  buffer: { t: number; level_s: number }[];
  segments: { t: number; rep_id: number }[];
  stalls: { start: number; end: number | null }[];
}

export type LiveState = Map<number, RunTrace>;

export function newLiveState(): LiveState {
  return new Map();
}

export function applyItems(state: LiveState, items: TelemetryItem[]): void {
  for (const item of items) {
    let trace = state.get(item.run);
    if (!trace) {
      trace = { buffer: [], segments: [], stalls: [] };
      state.set(item.run, trace);
    }
    switch (item.kind) {
      case "BufferSample":
        trace.buffer.push({ t: item.t, level_s: item.level_s ?? 0 });
        break;
      case "SegmentCompleted":
        trace.segments.push({ t: item.t, rep_id: item.rep_id ?? 0 });
        break;
      case "StallStart":
        trace.stalls.push({ start: item.t, end: null });
        break;
      case "StallEnd": {
        const open = trace.stalls.find((s) => s.end === null);
        if (open) open.end = item.t;
        break;
      }
    }
  }
}

function polylinePoints(
  pts: { t: number; v: number }[],
  tMax: number,
  vMax: number,
  width: number,
  height: number,
): string {
  if (tMax <= 0 || vMax <= 0) return "";
  return pts
    .map((p) => `${((p.t / tMax) * width).toFixed(1)},${(height - (p.v / vMax) * (height - 6)).toFixed(1)}`)
    .join(" ");
}

/** Buffer-level chart for one run, with stall windows shaded behind the line. */
export function renderBufferChart(trace: RunTrace, width = 600, height = 120): string {
  const tMax = Math.max(1, ...trace.buffer.map((p) => p.t));
  const vMax = Math.max(1, ...trace.buffer.map((p) => p.level_s));
  const shading = trace.stalls
    .map((s) => {
      const x0 = (s.start / tMax) * width;
      const x1 = ((s.end ?? tMax) / tMax) * width;
      return `<rect x="${x0.toFixed(1)}" y="0" width="${(x1 - x0).toFixed(1)}" height="${height}" class="stall"/>`;
    })
    .join("");
  const points = polylinePoints(
    trace.buffer.map((p) => ({ t: p.t, v: p.level_s })), tMax, vMax, width, height);
  return (
    `<svg viewBox="0 0 ${width} ${height}" class="chart">${shading}` +
    `<polyline points="${points}" fill="none" class="buffer-line"/></svg>`
  );
}

/** Stepwise selected-representation chart for one run. */
export function renderBitrateChart(
  trace: RunTrace,
  ladderKbps: number[],
  width = 600,
  height = 120,
): string {
  if (trace.segments.length === 0) return `<svg viewBox="0 0 ${width} ${height}" class="chart"></svg>`;
  const tMax = Math.max(1, ...trace.segments.map((p) => p.t));
  const vMax = Math.max(...ladderKbps, 1);
  const pts: { t: number; v: number }[] = [];
  let prev: number | null = null;
  for (const seg of trace.segments) {
    const kbps = ladderKbps[seg.rep_id] ?? 0;
    if (prev !== null) pts.push({ t: seg.t, v: prev });
    pts.push({ t: seg.t, v: kbps });
    prev = kbps;
  }
  const points = polylinePoints(pts, tMax, vMax, width, height);
  return (
    `<svg viewBox="0 0 ${width} ${height}" class="chart">` +
    `<polyline points="${points}" fill="none" class="bitrate-line"/></svg>`
  );
}

export function summarize(trace: RunTrace): { segments: number; stalls: number; lastBuffer: number } {
  return {
    segments: trace.segments.length,
    stalls: trace.stalls.length,
    lastBuffer: trace.buffer.length ? trace.buffer[trace.buffer.length - 1].level_s : 0,
  };
}
