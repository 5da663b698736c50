/** DTOs mirroring the control API payloads and the trajectory file schema. */

export interface StageInput {
  bandwidth_kbps: number;
  duration_s: number;
  delay_ms?: number;
  loss_pct?: number;
}

export interface TrajectoryDoc {
  trajectory_version: 1;
  repeat: "clamp" | "cycle";
  stages: StageInput[];
}

export interface ExperimentSummary {
  id: string;
  name: string;
  status: "queued" | "running" | "done" | "failed";
  experiment_id: string | null;
  error: string | null;
}

export interface RunScalars {
  avg_download_bitrate_kbps: number;
  startup_time_s: number | null;
  stall_count: number;
  total_stall_time_s: number;
  quality_switches: number;
  instability: number;
  inefficiency: number;
  bandwidth_index: number | null;
  qoe_score: number;
}

export interface RunEntry {
  run_index: number;
  seed: number;
  status: string;
  scalars: RunScalars | null;
}

export interface AggregateBlock {
  n_runs: number;
  mean: Record<string, number | null>;
  min: Record<string, number | null>;
  max: Record<string, number | null>;
  stddev: Record<string, number | null>;
}

export interface ExperimentReport {
  experiment_id: string;
  aggregate: AggregateBlock | null;
  runs: RunEntry[];
}

export interface TelemetryItem {
  run: number;
  t: number;
  kind: "BufferSample" | "SegmentCompleted" | "StallStart" | "StallEnd";
  level_s?: number;
  rep_id?: number;
  segment_index?: number;
  bytes?: number;
  download_s?: number;
}

export interface TelemetryDelta {
  cursor: number;
  items: TelemetryItem[];
  status: string;
}
