import { ApiClient, pollTelemetry } from "./api.js";
import { buildComparison, renderComparison } from "./comparison.js";
import {
  applyItems, newLiveState, renderBufferChart, renderBitrateChart, summarize,
} from "./liveview.js";
import {
  parseTrajectory, previewPath, toDoc, totalDuration, validate,
  type EditorState,
} from "./trajectory.js";
import type { ExperimentSummary } from "./types.js";

const client = new ApiClient();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

/* ---- trajectory editor ---- */

let editor: EditorState = { repeat: "clamp", stages: [] };

function refreshEditor(): void {
  const errs = validate(editor);
  el("traj-errors").innerHTML = errs.map((e) => `<li>${e}</li>`).join("");
  el("traj-total").textContent = `${totalDuration(editor)} s over ${editor.stages.length} stages`;
  const path = previewPath(editor);
  el("traj-preview").innerHTML =
    path ? `<svg viewBox="0 0 600 160" class="chart"><path d="${path}" fill="none" class="traj-line"/></svg>` : "";
  (el<HTMLTextAreaElement>("traj-json")).value = JSON.stringify(toDoc(editor), null, 2);
}

function wireEditor(): void {
  el<HTMLTextAreaElement>("traj-json").addEventListener("change", (ev) => {
    try {
      editor = parseTrajectory((ev.target as HTMLTextAreaElement).value);
      refreshEditor();
    } catch (e) {
      el("traj-errors").innerHTML = `<li>${(e as Error).message}</li>`;
    }
  });
  el("traj-load").addEventListener("click", async () => {
    const name = el<HTMLSelectElement>("traj-select").value;
    const docs = await client.trajectories();
    const doc = docs.find((d) => d.name === name);
    if (doc) {
      const { name: _, ...rest } = doc;
      editor = parseTrajectory(JSON.stringify(rest));
      refreshEditor();
    }
  });
}

/* ---- experiment submission and live telemetry ---- */

function wireRunForm(): void {
  el("run-submit").addEventListener("click", async () => {
    const config = {
      name: el<HTMLInputElement>("run-name").value || "console",
      profile: el<HTMLSelectElement>("run-profile").value,
      trajectory: el<HTMLSelectElement>("traj-select").value,
      abr: el<HTMLSelectElement>("run-abr").value,
      runs: Number(el<HTMLInputElement>("run-count").value) || 1,
      seed_base: Number(el<HTMLInputElement>("run-seed").value) || 0,
    };
    try {
      const job = await client.submit(config);
      watchJob(job.id);
    } catch (e) {
      el("run-status").textContent = (e as Error).message;
    }
  });
}

function watchJob(jobId: string): void {
  const state = newLiveState();
  el("run-status").textContent = `${jobId}: queued`;
  pollTelemetry(client, jobId, (delta) => {
    applyItems(state, delta.items);
    el("run-status").textContent = `${jobId}: ${delta.status}`;
    const panels: string[] = [];
    for (const [run, trace] of [...state.entries()].sort((a, b) => a[0] - b[0])) {
      const s = summarize(trace);
      panels.push(
        `<div class="run-panel"><h4>run ${run}` +
        ` <small>${s.segments} segments, ${s.stalls} stalls, buffer ${s.lastBuffer.toFixed(1)} s</small></h4>` +
        renderBufferChart(trace) + renderBitrateChart(trace, currentLadder) + `</div>`,
      );
    }
    el("live-panels").innerHTML = panels.join("");
    if (delta.status === "done" || delta.status === "failed") void refreshExperiments();
  });
}

/* ---- comparison view ---- */

let currentLadder: number[] = [];

async function refreshExperiments(): Promise<void> {
  const jobs = await client.experiments();
  const done = jobs.filter((j) => j.status === "done");
  el("compare-list").innerHTML = done
    .map((j) => `<label><input type="checkbox" value="${j.id}"> ${j.name} (${j.id})</label>`)
    .join("");
  el("run-status").textContent = `${jobs.length} jobs, ${done.length} finished`;
}

async function renderSelectedComparison(): Promise<void> {
  const boxes = el("compare-list").querySelectorAll<HTMLInputElement>("input:checked");
  const jobs: ExperimentSummary[] = await client.experiments();
  const entries = [];
  for (const box of boxes) {
    const job = jobs.find((j) => j.id === box.value);
    if (!job) continue;
    entries.push({ jobId: job.id, name: job.name, report: await client.report(job.id) });
  }
  el("compare-table").innerHTML = entries.length
    ? renderComparison(buildComparison(entries))
    : "<p>select finished experiments above</p>";
}

/* ---- bootstrap ---- */

async function init(): Promise<void> {
  const [profiles, trajectories, abr] = await Promise.all([
    client.profiles(), client.trajectories(), client.abrPolicies(),
  ]);
  el<HTMLSelectElement>("run-profile").innerHTML =
    profiles.map((p) => `<option>${p.name}</option>`).join("");
  el<HTMLSelectElement>("traj-select").innerHTML =
    trajectories.map((t) => `<option>${t.name}</option>`).join("");
  el<HTMLSelectElement>("run-abr").innerHTML =
    abr.map((a) => `<option>${a}</option>`).join("");
  el<HTMLSelectElement>("run-profile").addEventListener("change", async (ev) => {
    const name = (ev.target as HTMLSelectElement).value;
    const prof = profiles.find((p: { name: string }) => p.name === name) as
      { name: string; representations: { bitrate_kbps: number }[] } | undefined;
    currentLadder = prof ? prof.representations.map((r) => r.bitrate_kbps) : [];
  });
  el<HTMLSelectElement>("run-profile").dispatchEvent(new Event("change"));
  wireEditor();
  wireRunForm();
  el("compare-render").addEventListener("click", () => void renderSelectedComparison());
  await refreshExperiments();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void init();
}
