import type { ExperimentReport } from "./types.js";

/** The aggregate metrics shown side by side, in display order. */
export const METRIC_ROWS: { key: string; label: string; lowerIsBetter: boolean }[] = [
  { key: "avg_download_bitrate_kbps", label: "Avg bitrate (kbps)", lowerIsBetter: false },
  { key: "startup_time_s", label: "Startup time (s)", lowerIsBetter: true },
  { key: "stall_count", label: "Stalls", lowerIsBetter: true },
  { key: "total_stall_time_s", label: "Stall time (s)", lowerIsBetter: true },
  { key: "quality_switches", label: "Quality switches", lowerIsBetter: true },
  { key: "instability", label: "Instability", lowerIsBetter: true },
  { key: "inefficiency", label: "Inefficiency", lowerIsBetter: true },
];

export interface ComparisonCell {
  value: number | null;
  text: string;
  best: boolean;
}

export interface ComparisonRow {
  key: string;
  label: string;
  cells: ComparisonCell[];
}

export interface ComparisonTable {
  columns: { jobId: string; name: string; nRuns: number }[];
  rows: ComparisonRow[];
}

export function formatMetric(key: string, value: number | null): string {
  if (value === null || value === undefined) return "n/a";
  if (!Number.isFinite(value)) return "inf";
  if (key === "stall_count" || key === "quality_switches") {
    return Number.isInteger(value) ? String(value) : value.toFixed(1);
  }
  if (key === "avg_download_bitrate_kbps") return value.toFixed(0);
  if (key === "instability" || key === "inefficiency") return value.toFixed(4);
  return value.toFixed(2);
}

/**
 * Side-by-side aggregate means for a set of finished experiments. The best
 * value in each row is flagged for highlighting; ties flag every holder.
 */
export function buildComparison(
  entries: { jobId: string; name: string; report: ExperimentReport }[],
): ComparisonTable {
  const columns = entries.map((e) => ({
    jobId: e.jobId,
    name: e.name,
    nRuns: e.report.aggregate?.n_runs ?? 0,
  }));
  const rows = METRIC_ROWS.map(({ key, label, lowerIsBetter }) => {
    const values = entries.map((e) => {
      const v = e.report.aggregate?.mean[key];
      return v === undefined || v === null || !Number.isFinite(v) ? null : v;
    });
    const usable = values.filter((v): v is number => v !== null);
    const best = usable.length
      ? (lowerIsBetter ? Math.min(...usable) : Math.max(...usable))
      : null;
    const cells = values.map((v) => ({
      value: v,
      text: formatMetric(key, v),
      best: v !== null && v === best,
    }));
    return { key, label, cells };
  });
  return { columns, rows };
}

function escapeHtml(s: string): string {
  return s.replace(/[&<>"]/g, (c) =>
    ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" })[c]!,
  );
}

export function renderComparison(table: ComparisonTable): string {
  const head = table.columns
    .map((c) => `<th>${escapeHtml(c.name)}<small>${c.nRuns} runs</small></th>`)
    .join("");
  const body = table.rows
    .map((row) => {
      const cells = row.cells
        .map((c) => `<td${c.best ? ' class="best"' : ""}>${c.text}</td>`)
        .join("");
      return `<tr><th>${escapeHtml(row.label)}</th>${cells}</tr>`;
    })
    .join("");
  return (
    `<table class="comparison"><thead><tr><th></th>${head}</tr></thead>` +
    `<tbody>${body}</tbody></table>`
  );
}
