import type {
  ExperimentReport,
  ExperimentSummary,
  TelemetryDelta,
  TrajectoryDoc,
} from "./types.js";

/** Thin fetch wrapper around the control API. All methods throw on non-2xx. */
export class ApiClient {
  constructor(private base: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(this.base + path);
    if (!res.ok) throw new Error(`GET ${path}: ${res.status}`);
    return res.json() as Promise<T>;
  }

  profiles(): Promise<{ name: string }[]> {
    return this.get("/api/profiles");
  }

  trajectories(): Promise<({ name: string } & TrajectoryDoc)[]> {
    return this.get("/api/trajectories");
  }

  abrPolicies(): Promise<string[]> {
    return this.get("/api/abr");
  }

  experiments(): Promise<ExperimentSummary[]> {
    return this.get("/api/experiments");
  }

  experiment(id: string): Promise<ExperimentSummary> {
    return this.get(`/api/experiments/${id}`);
  }

  report(id: string): Promise<ExperimentReport> {
    return this.get(`/api/experiments/${id}/report`);
  }

  telemetry(id: string, cursor: number): Promise<TelemetryDelta> {
    return this.get(`/api/experiments/${id}/telemetry?cursor=${cursor}`);
  }

  async submit(config: Record<string, unknown>): Promise<ExperimentSummary> {
    const res = await fetch(this.base + "/api/experiments", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
    if (!res.ok) {
      const body = await res.text();
      throw new Error(`POST /api/experiments: ${res.status} ${body}`);
    }
    return res.json() as Promise<ExperimentSummary>;
  }
}

export interface PollHandle {
  stop(): void;
  done: Promise<void>;
}

/**
 * Poll telemetry deltas until the job leaves the queued/running states.
 * The cursor resumes from where the previous delta ended, so each item is
 * delivered exactly once.
 */
export function pollTelemetry(
  client: ApiClient,
  jobId: string,
  onDelta: (delta: TelemetryDelta) => void,
  intervalMs = 500,
): PollHandle {
  let cursor = 0;
  let stopped = false;
  const done = (async () => {
    while (!stopped) {
      const delta = await client.telemetry(jobId, cursor);
      cursor = delta.cursor;
      onDelta(delta);
      if (delta.status !== "queued" && delta.status !== "running") return;
      await new Promise((r) => setTimeout(r, intervalMs));
    }
  })();
  return { stop: () => { stopped = true; }, done };
}
