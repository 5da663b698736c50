"""Per-run quality metrics computed from an EventLog, plus cross-run aggregation."""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Optional

from .link import Trajectory
from .player import (
    EventLog,
    SEGMENT_COMPLETED,
    STALL_START,
    STALL_END,
    STARTUP_COMPLETE,
    PLAY,
    END,
    BUFFER_SAMPLE,
)


class UndefinedMetricError(ValueError):
    pass


IDEAL = math.inf  # sentinel for a bandwidth index with zero instability/inefficiency

SCALAR_FIELDS = (
    "avg_download_bitrate_kbps",
    "startup_time_s",
    "stall_count",
    "total_stall_time_s",
    "quality_switches",
    "instability",
    "inefficiency",
    "bandwidth_index",
    "qoe_score",
)


@dataclass
class MetricsReport:
    avg_download_bitrate_kbps: float
    startup_time_s: Optional[float]  # None marks a failed start
    stall_count: int
    total_stall_time_s: float
    quality_switches: int
    instability: float
    inefficiency: float
    bandwidth_index: float
    qoe_score: float
    buffer_series: list[tuple[float, float]] = field(default_factory=list)
    bitrate_series: list[tuple[float, float]] = field(default_factory=list)
    instability_series: list[float] = field(default_factory=list)

    def scalars(self) -> dict:
        return {name: getattr(self, name) for name in SCALAR_FIELDS}

    def to_dict(self) -> dict:
        d = self.scalars()
        d["bandwidth_index"] = None if d["bandwidth_index"] == IDEAL else d["bandwidth_index"]
        return {
            "scalars": d,
            "series": {
                "buffer": self.buffer_series,
                "bitrate": self.bitrate_series,
                "instability": self.instability_series,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        s = dict(d["scalars"])
        if s.get("bandwidth_index") is None:
            s["bandwidth_index"] = IDEAL
        series = d.get("series", {})
        return cls(
            **s,
            buffer_series=[tuple(p) for p in series.get("buffer", [])],
            bitrate_series=[tuple(p) for p in series.get("bitrate", [])],
            instability_series=list(series.get("instability", [])),
        )


def _segment_bitrates(log: EventLog) -> list[float]:
    ladder = {i: b for i, b in enumerate(_ladder_kbps(log))}
    return [ladder[e.data["rep_id"]] for e in log.of_kind(SEGMENT_COMPLETED)]


def _ladder_kbps(log: EventLog) -> list[float]:
    ladder = [float(b) for b in log.config.get("ladder_kbps", [])]
    if not ladder:
        raise UndefinedMetricError(f"log for profile {log.profile_name!r} carries no ladder")
    return ladder


def quality_switches(log: EventLog) -> int:
    reps = [e.data["rep_id"] for e in log.of_kind(SEGMENT_COMPLETED)]
    return sum(1 for a, b in zip(reps, reps[1:]) if a != b)


def stall_stats(log: EventLog) -> tuple[int, float]:
    count = 0
    total = 0.0
    open_t: Optional[float] = None
    end_t = log.events[-1].t if log.events else 0.0
    for e in log.events:
        if e.kind == STALL_START:
            count += 1
            open_t = e.t
        elif e.kind == STALL_END and open_t is not None:
            total += e.t - open_t
            open_t = None
    if open_t is not None:
        total += end_t - open_t
    return count, total


def startup_time(log: EventLog) -> Optional[float]:
    play = next((e.t for e in log.events if e.kind == PLAY), None)
    started = next((e.t for e in log.events if e.kind == STARTUP_COMPLETE), None)
    if play is None or started is None:
        return None
    return started - play


def average_bitrate(log: EventLog) -> float:
    bitrates = _segment_bitrates(log)
    if not bitrates:
        raise UndefinedMetricError("no completed segments")
    return sum(bitrates) / len(bitrates)


def instability_from_bitrates(bitrates: list[float], k: Optional[int] = None
                              ) -> tuple[float, list[float]]:
    """Windowed switch-magnitude / bitrate-sum ratio over a per-segment trace.

    Returns (mean over valid positions, full sliding series). Positions are
    1-based; position t is valid once t - k >= 1.
    """
    n = len(bitrates)
    if n < 2:
        raise UndefinedMetricError("instability needs at least two segments")
    if k is None:
        k = min(20, n - 1)
    if not 1 <= k <= n - 1:
        raise UndefinedMetricError(f"window k={k} invalid for {n} segments")
    series = []
    for t in range(k + 1, n + 1):  # 1-based position
        num = sum(abs(bitrates[t - d - 1] - bitrates[t - d - 2]) for d in range(k))
        den = sum(bitrates[t - d - 1] for d in range(1, k + 1))
        series.append(num / den)
    return sum(series) / len(series), series


def instability(log: EventLog, k: Optional[int] = None) -> float:
    return instability_from_bitrates(_segment_bitrates(log), k)[0]


def inefficiency(log: EventLog, traj: Trajectory) -> float:
    completed = log.of_kind(SEGMENT_COMPLETED)
    if not completed:
        raise UndefinedMetricError("no completed segments")
    ladder = _ladder_kbps(log)
    total = 0.0
    for e in completed:
        b = ladder[e.data["rep_id"]]
        a = e.data["request_t"]
        w = traj.mean_effective_bandwidth_kbps(a, a + e.data["download_s"])
        total += abs(b - w) / w
    return total / len(completed)


def bandwidth_index(avg_bitrate_kbps: float, inst: float, ineff: float,
                    c: float = 1e4) -> float:
    if inst == 0 or ineff == 0:
        return IDEAL
    return avg_bitrate_kbps / (inst * ineff * c)


DEFAULT_QOE_WEIGHTS = {"w_bitrate": 1.0, "w_stall": 4.0, "w_switch": 1.0, "w_startup": 1.0}


def qoe_score(avg_bitrate_kbps: float, top_bitrate_kbps: float, total_stall_s: float,
              media_duration_s: float, switches: int, n_segments: int,
              startup_s: Optional[float], weights: Optional[dict] = None) -> float:
    w = dict(DEFAULT_QOE_WEIGHTS)
    if weights:
        w.update(weights)
    startup_term = 1.0 if startup_s is None else min(startup_s / 10.0, 1.0)
    score = (
        w["w_bitrate"] * (avg_bitrate_kbps / top_bitrate_kbps)
        - w["w_stall"] * (total_stall_s / media_duration_s)
        - w["w_switch"] * (switches / n_segments)
        - w["w_startup"] * startup_term
    )
    return min(score, 1.0)


def compute_report(log: EventLog, traj: Trajectory,
                   instability_k: Optional[int] = None,
                   qoe_weights: Optional[dict] = None) -> MetricsReport:
    completed = log.of_kind(SEGMENT_COMPLETED)
    if not completed:
        raise UndefinedMetricError("empty run: no completed segments")
    ladder = _ladder_kbps(log)
    bitrates = _segment_bitrates(log)
    avg = sum(bitrates) / len(bitrates)
    count, stall_total = stall_stats(log)
    switches = quality_switches(log)
    startup = startup_time(log)
    if len(bitrates) >= 2:
        inst, inst_series = instability_from_bitrates(bitrates, instability_k)
    else:
        inst, inst_series = 0.0, []
    ineff = inefficiency(log, traj)
    media_duration = sum(
        e.data.get("media_s", log.config.get("segment_duration_s", 4.0)) for e in completed
    )
    return MetricsReport(
        avg_download_bitrate_kbps=avg,
        startup_time_s=startup,
        stall_count=count,
        total_stall_time_s=stall_total,
        quality_switches=switches,
        instability=inst,
        inefficiency=ineff,
        bandwidth_index=bandwidth_index(avg, inst, ineff),
        qoe_score=qoe_score(avg, max(ladder), stall_total, media_duration,
                            switches, len(bitrates), startup, qoe_weights),
        buffer_series=[(e.t, e.data["level_s"]) for e in log.of_kind(BUFFER_SAMPLE)],
        bitrate_series=[(e.t, ladder[e.data["rep_id"]]) for e in completed],
        instability_series=inst_series,
    )


@dataclass
class AggregateReport:
    n_runs: int
    mean: dict
    min: dict
    max: dict
    stddev: dict

    def to_dict(self) -> dict:
        return {"n_runs": self.n_runs, "mean": self.mean, "min": self.min,
                "max": self.max, "stddev": self.stddev}

    @classmethod
    def from_dict(cls, d: dict) -> "AggregateReport":
        return cls(d["n_runs"], d["mean"], d["min"], d["max"], d["stddev"])


def aggregate_runs(reports: list[MetricsReport]) -> AggregateReport:
    if not reports:
        raise UndefinedMetricError("no reports to aggregate")
    mean, lo, hi, sd = {}, {}, {}, {}
    for name in SCALAR_FIELDS:
        values = [getattr(r, name) for r in reports]
        values = [v for v in values if v is not None and not math.isinf(v)]
        if not values:
            mean[name] = lo[name] = hi[name] = sd[name] = None
            continue
        mean[name] = sum(values) / len(values)
        lo[name] = min(values)
        hi[name] = max(values)
        sd[name] = statistics.pstdev(values) if len(values) > 1 else 0.0
    return AggregateReport(n_runs=len(reports), mean=mean, min=lo, max=hi, stddev=sd)
