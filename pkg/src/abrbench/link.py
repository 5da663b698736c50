"""Scheduled link conditions: piecewise-constant bandwidth/delay/loss trajectories.

The same Trajectory drives both the deterministic virtual-time integrator used
by the simulator and the wall-clock shaping proxy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class LinkStage:
    bandwidth_kbps: float
    duration_s: float
    delay_ms: float = 0.0
    loss_pct: float = 0.0

    def validate(self, index: int):
        if self.bandwidth_kbps <= 0:
            raise TrajectoryError(f"stage {index}: bandwidth_kbps must be positive")
        if self.duration_s <= 0:
            raise TrajectoryError(f"stage {index}: duration_s must be positive")
        if self.delay_ms < 0:
            raise TrajectoryError(f"stage {index}: delay_ms must be >= 0")
        if not 0 <= self.loss_pct < 100:
            raise TrajectoryError(f"stage {index}: loss_pct must be in [0, 100)")

    @property
    def effective_bps(self) -> float:
        """Goodput in bits/second after multiplicative loss."""
        return self.bandwidth_kbps * 1000.0 * (1.0 - self.loss_pct / 100.0)


@dataclass(frozen=True)
class LinkParams:
    bandwidth_kbps: float
    delay_ms: float
    loss_pct: float

    @property
    def effective_bps(self) -> float:
        return self.bandwidth_kbps * 1000.0 * (1.0 - self.loss_pct / 100.0)


class Trajectory:
    def __init__(self, stages, repeat: str = "clamp", name: str = ""):
        stages = tuple(stages)
        if not stages:
            raise TrajectoryError("trajectory needs at least one stage")
        if repeat not in ("clamp", "cycle"):
            raise TrajectoryError(f"repeat must be 'clamp' or 'cycle', got {repeat!r}")
        for i, st in enumerate(stages):
            st.validate(i)
        self.stages = stages
        self.repeat = repeat
        self.name = name
        # cumulative stage start times, last entry = total duration
        self._starts = [0.0]
        for st in stages:
            self._starts.append(self._starts[-1] + st.duration_s)

    @property
    def total_duration_s(self) -> float:
        return self._starts[-1]

    def _stage_at(self, t: float) -> tuple[LinkStage, float]:
        """Return (stage active at t, time remaining in it; inf once clamped)."""
        if t < 0:
            raise ValueError("t must be >= 0")
        total = self.total_duration_s
        if t >= total:
            if self.repeat == "clamp":
                return self.stages[-1], math.inf
            t = t % total
        # linear scan is fine: trajectories are short
        for i, st in enumerate(self.stages):
            end = self._starts[i + 1]
            if t < end:
                if self.repeat == "clamp" and i == len(self.stages) - 1:
                    return st, math.inf
                return st, end - t
        return self.stages[-1], math.inf

    def params_at(self, t: float) -> LinkParams:
        st, _ = self._stage_at(t)
        return LinkParams(st.bandwidth_kbps, st.delay_ms, st.loss_pct)

    def transfer_finish_time(self, start_t: float, size_bytes: float,
                             include_rtt: bool = True) -> float:
        """Completion instant of a `size_bytes` transfer requested at `start_t`.

        One RTT (2 x delay_ms at the request instant) elapses before the first
        byte; the payload then drains through the piecewise-constant effective
        bandwidth, integrated exactly across stage boundaries. A pipelined
        request (sent while a previous response was still streaming) skips the
        first-byte RTT via `include_rtt=False`.
        """
        if size_bytes < 0:
            raise ValueError("size must be >= 0")
        if start_t < 0:
            raise ValueError("start_t must be >= 0")
        t = start_t
        if include_rtt:
            t += 2.0 * self.params_at(start_t).delay_ms / 1000.0
        bits = size_bytes * 8.0
        while bits > 0:
            st, remaining = self._stage_at(t)
            rate = st.effective_bps
            if remaining is math.inf or bits <= rate * remaining:
                return t + bits / rate
            bits -= rate * remaining
            # guarantee progress when remaining is below the ulp of t
            t = max(t + remaining, math.nextafter(t, math.inf))
        return t

    def mean_effective_bandwidth_kbps(self, a: float, b: float) -> float:
        """Time-weighted mean effective bandwidth over [a, b], in kbps."""
        if b < a:
            raise ValueError("interval end before start")
        if b == a:
            return self.params_at(a).effective_bps / 1000.0
        bits = 0.0
        t = a
        while t < b:
            st, remaining = self._stage_at(t)
            dt = min(b - t, remaining)
            bits += st.effective_bps * dt
            t = max(t + dt, math.nextafter(t, math.inf))
        return bits / (b - a) / 1000.0

    def to_dict(self) -> dict:
        return {
            "trajectory_version": 1,
            "repeat": self.repeat,
            "stages": [
                {"bandwidth_kbps": s.bandwidth_kbps, "duration_s": s.duration_s,
                 "delay_ms": s.delay_ms, "loss_pct": s.loss_pct}
                for s in self.stages
            ],
        }


def trajectory_from_dict(doc: dict, name: str = "") -> Trajectory:
    if not isinstance(doc, dict):
        raise TrajectoryError("trajectory document must be a JSON object")
    version = doc.get("trajectory_version")
    if version != 1:
        raise TrajectoryError(f"unsupported trajectory_version {version!r}")
    raw_stages = doc.get("stages")
    if not isinstance(raw_stages, list) or not raw_stages:
        raise TrajectoryError("'stages' must be a non-empty list")
    stages = []
    for i, raw in enumerate(raw_stages):
        if not isinstance(raw, dict):
            raise TrajectoryError(f"stage {i}: must be an object")
        try:
            stage = LinkStage(
                bandwidth_kbps=float(raw["bandwidth_kbps"]),
                duration_s=float(raw["duration_s"]),
                delay_ms=float(raw.get("delay_ms", 0.0)),
                loss_pct=float(raw.get("loss_pct", 0.0)),
            )
        except KeyError as e:
            raise TrajectoryError(f"stage {i}: missing field {e.args[0]}") from None
        stage.validate(i)
        stages.append(stage)
    return Trajectory(stages, repeat=doc.get("repeat", "clamp"), name=name)


def load_trajectory(path) -> Trajectory:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise TrajectoryError(f"{path}: malformed JSON at line {e.lineno}: {e.msg}") from None
    return trajectory_from_dict(doc, name=path.stem)


def constant_trajectory(bandwidth_kbps: float, delay_ms: float = 0.0, loss_pct: float = 0.0,
                        duration_s: float = 3600.0) -> Trajectory:
    return Trajectory([LinkStage(bandwidth_kbps, duration_s, delay_ms, loss_pct)],
                      name=f"const-{bandwidth_kbps:g}")


# module-level function forms, matching the rest of the API surface
def params_at(traj: Trajectory, t: float) -> LinkParams:
    return traj.params_at(t)


def transfer_finish_time(traj: Trajectory, start_t: float, size_bytes: float) -> float:
    return traj.transfer_finish_time(start_t, size_bytes)
