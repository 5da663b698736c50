"""Playback engine: download/buffer/stall state machine with pluggable ABR policies.

The engine works against a link abstraction so the same state machine runs in
deterministic virtual time (VirtualLink) or against a real HTTP origin behind
the shaping proxy (HttpLink).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import requests

from .link import Trajectory
from .media import Manifest


# --------------------------------------------------------------------------- events

PLAY = "Play"
STARTUP_COMPLETE = "StartupComplete"
SEGMENT_REQUESTED = "SegmentRequested"
SEGMENT_COMPLETED = "SegmentCompleted"
QUALITY_SWITCH = "QualitySwitch"
STALL_START = "StallStart"
STALL_END = "StallEnd"
BUFFER_SAMPLE = "BufferSample"
END = "End"


@dataclass(frozen=True)
class PlaybackEvent:
    t: float
    kind: str
    data: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"t": self.t, "kind": self.kind, **self.data}


@dataclass
class EventLog:
    profile_name: str
    trajectory_name: str
    abr_name: str
    seed: int
    config: dict
    events: list[PlaybackEvent] = field(default_factory=list)
    status: str = "ok"

    def of_kind(self, kind: str) -> list[PlaybackEvent]:
        return [e for e in self.events if e.kind == kind]

    def to_jsonl(self) -> str:
        header = {
            "eventlog_version": 1,
            "profile": self.profile_name,
            "trajectory": self.trajectory_name,
            "abr": self.abr_name,
            "seed": self.seed,
            "config": self.config,
            "status": self.status,
        }
        lines = [json.dumps(header, sort_keys=True)]
        lines.extend(json.dumps(e.to_dict(), sort_keys=True) for e in self.events)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EventLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = json.loads(lines[0])
        if header.get("eventlog_version") != 1:
            raise ValueError(f"unsupported eventlog_version {header.get('eventlog_version')!r}")
        log = cls(
            profile_name=header["profile"],
            trajectory_name=header["trajectory"],
            abr_name=header["abr"],
            seed=header["seed"],
            config=header["config"],
            status=header.get("status", "ok"),
        )
        for ln in lines[1:]:
            d = json.loads(ln)
            t, kind = d.pop("t"), d.pop("kind")
            log.events.append(PlaybackEvent(t, kind, d))
        return log


# --------------------------------------------------------------------------- config / ABR

@dataclass
class PlayerConfig:
    buffer_capacity_s: float = 30.0
    startup_threshold_s: float = 4.0
    rebuffer_threshold_s: float = 4.0
    abr: str = "throughput"
    abr_params: dict = field(default_factory=dict)
    fetch_audio: bool = True

    def __post_init__(self):
        if not 0 < self.startup_threshold_s <= self.buffer_capacity_s:
            raise ValueError("need 0 < startup_threshold_s <= buffer_capacity_s")
        if not 0 < self.rebuffer_threshold_s <= self.buffer_capacity_s:
            raise ValueError("need 0 < rebuffer_threshold_s <= buffer_capacity_s")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AbrContext:
    buffer_level_s: float
    buffer_capacity_s: float
    throughput_samples: list[tuple[int, float]]  # (bytes, download seconds)
    last_rep_id: Optional[int]
    segment_index: int
    ladder_kbps: list[float]


AbrPolicy = Callable[[AbrContext, dict], int]


def _throughput_estimate_kbps(samples: list[tuple[int, float]], window_k: int) -> Optional[float]:
    """Harmonic mean of the last `window_k` per-segment throughputs, in kbps."""
    recent = [s for s in samples[-window_k:] if s[1] > 0]
    if not recent:
        return None
    rates = [b * 8.0 / 1000.0 / d for b, d in recent]
    return len(rates) / sum(1.0 / r for r in rates)


def _highest_at_most(ladder: list[float], budget_kbps: float) -> int:
    best = 0
    for i, b in enumerate(ladder):
        if b <= budget_kbps:
            best = i
    return best


def abr_throughput(ctx: AbrContext, params: dict) -> int:
    window_k = params.get("window_k", 5)
    safety = params.get("safety_factor", 0.9)
    est = _throughput_estimate_kbps(ctx.throughput_samples, window_k)
    if est is None:
        return 0
    return _highest_at_most(ctx.ladder_kbps, safety * est)


def abr_buffer(ctx: AbrContext, params: dict) -> int:
    reservoir = params.get("reservoir_s", 5.0)
    cushion = params.get("cushion_s", 20.0)
    level = ctx.buffer_level_s
    top = len(ctx.ladder_kbps) - 1
    if level <= reservoir:
        return 0
    if level >= reservoir + cushion:
        return top
    return int((level - reservoir) / cushion * top)


def abr_hybrid(ctx: AbrContext, params: dict) -> int:
    window_k = params.get("window_k", 5)
    est = _throughput_estimate_kbps(ctx.throughput_samples, window_k)
    if est is None:
        return 0
    fill = min(max(ctx.buffer_level_s / ctx.buffer_capacity_s, 0.0), 1.0)
    safety = 0.5 + 0.5 * fill
    return _highest_at_most(ctx.ladder_kbps, safety * est)


class AbrRegistry:
    def __init__(self):
        self._policies: dict[str, AbrPolicy] = {}

    def register(self, name: str, policy: AbrPolicy):
        if name in self._policies:
            raise ValueError(f"ABR policy {name!r} already registered")
        self._policies[name] = policy

    def get(self, name: str) -> AbrPolicy:
        try:
            return self._policies[name]
        except KeyError:
            raise KeyError(f"unknown ABR policy {name!r}; known: {sorted(self._policies)}") from None

    def names(self) -> list[str]:
        return sorted(self._policies)


def default_registry() -> AbrRegistry:
    reg = AbrRegistry()
    reg.register("throughput", abr_throughput)
    reg.register("buffer", abr_buffer)
    reg.register("hybrid", abr_hybrid)
    return reg


# --------------------------------------------------------------------------- links

class VirtualLink:
    """Deterministic link driven by a Trajectory in virtual time."""

    def __init__(self, traj: Trajectory):
        self.traj = traj

    def download(self, t: float, nbytes: int, path: str = "",
                 pipelined: bool = False) -> tuple[float, int]:
        return self.traj.transfer_finish_time(t, nbytes, include_rtt=not pipelined), nbytes

    def sleep_until(self, t: float) -> float:
        return t


class HttpLink:
    """Wall-clock link fetching real segments over HTTP (through the proxy)."""

    def __init__(self, base_url: str):
        self.base_url = base_url.rstrip("/")
        self.session = requests.Session()
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0

    def download(self, t: float, nbytes: int, path: str = "",
                 pipelined: bool = False) -> tuple[float, int]:
        resp = self.session.get(self.base_url + path)
        resp.raise_for_status()
        return self.now(), len(resp.content)

    def sleep_until(self, t: float) -> float:
        dt = t - self.now()
        if dt > 0:
            time.sleep(dt)
        return self.now()


# --------------------------------------------------------------------------- engine

class _Player:
    def __init__(self, manifest: Manifest, link, config: PlayerConfig, seed: int,
                 policy: AbrPolicy, trajectory_name: str):
        self.manifest = manifest
        self.link = link
        self.config = config
        self.policy = policy
        log_config = config.to_dict()
        # content facts metrics need without re-resolving the profile
        log_config["ladder_kbps"] = [r.bitrate_kbps for r in manifest.profile.representations]
        log_config["segment_duration_s"] = manifest.profile.segment_duration_s
        log_config["total_duration_s"] = manifest.profile.total_duration_s
        self.log = EventLog(
            profile_name=manifest.profile.name,
            trajectory_name=trajectory_name,
            abr_name=config.abr,
            seed=seed,
            config=log_config,
        )
        self.t = 0.0
        self.buffer = 0.0
        self.state = "startup"  # startup | playing | stalled
        self.next_sample_t = 0.0
        self.content_done = False
        self.samples: list[tuple[int, float]] = []

    def emit(self, kind: str, **data):
        self.log.events.append(PlaybackEvent(round(self.t, 9), kind, data))

    def _tick_samples(self, upto: float):
        while self.next_sample_t <= upto + 1e-12:
            level = self.buffer
            if self.state == "playing":
                level = max(0.0, self.buffer - (self.next_sample_t - self.t))
            self.log.events.append(PlaybackEvent(self.next_sample_t, BUFFER_SAMPLE,
                                                 {"level_s": round(level, 9)}))
            self.next_sample_t += 1.0

    def advance(self, t_new: float):
        """Move the clock forward, draining the buffer while playing."""
        while t_new > self.t + 1e-12:
            if self.state == "playing" and self.buffer < t_new - self.t - 1e-12:
                # buffer empties before we reach t_new
                t_hit = self.t + self.buffer
                self._tick_samples(t_hit)
                self.t = t_hit
                self.buffer = 0.0
                if self.content_done:
                    return
                self.state = "stalled"
                self.emit(STALL_START)
                continue
            self._tick_samples(t_new)
            if self.state == "playing":
                self.buffer -= t_new - self.t
                if self.buffer < 0:
                    self.buffer = 0.0
            self.t = t_new

    def _maybe_start_or_resume(self):
        if self.state == "startup" and self.buffer >= self.config.startup_threshold_s - 1e-12:
            self.emit(STARTUP_COMPLETE)
            self.state = "playing"
        elif self.state == "stalled" and self.buffer >= self.config.rebuffer_threshold_s - 1e-12:
            self.emit(STALL_END)
            self.state = "playing"

    def run(self) -> EventLog:
        cfg = self.config
        manifest = self.manifest
        profile = manifest.profile
        ladder = [float(r.bitrate_kbps) for r in profile.representations]
        last_rep: Optional[int] = None
        self.emit(PLAY)

        for i in range(manifest.segment_count):
            seg_dur = profile.segment_media_duration(i)
            # high-watermark: wait until the next segment fits in the buffer
            if self.state == "playing" and self.buffer + seg_dur > cfg.buffer_capacity_s:
                wait = self.buffer + seg_dur - cfg.buffer_capacity_s
                self.advance(self.link.sleep_until(self.t + wait))

            ctx = AbrContext(
                buffer_level_s=self.buffer,
                buffer_capacity_s=cfg.buffer_capacity_s,
                throughput_samples=self.samples,
                last_rep_id=last_rep,
                segment_index=i,
                ladder_kbps=ladder,
            )
            rep_id = self.policy(ctx, cfg.abr_params)
            rep_id = max(0, min(rep_id, len(ladder) - 1))
            nbytes = manifest.video_segment_bytes(rep_id, i)
            path = manifest.url_template.format(rep_id=rep_id, segment_index=i)

            t_req = self.t
            self.emit(SEGMENT_REQUESTED, segment_index=i, rep_id=rep_id)
            t_done, got = self.link.download(self.t, nbytes, path)
            self.advance(t_done)
            download_s = t_done - t_req
            if last_rep is not None and rep_id != last_rep:
                self.emit(QUALITY_SWITCH, from_rep=last_rep, to_rep=rep_id)
            self.emit(SEGMENT_COMPLETED, segment_index=i, rep_id=rep_id,
                      bytes=got, download_s=round(download_s, 9),
                      request_t=round(t_req, 9), media_s=seg_dur)
            last_rep = rep_id
            self.buffer += seg_dur
            self._maybe_start_or_resume()

            # one throughput sample covers the whole paired fetch: the video
            # segment plus its audio, so the estimate reflects real goodput
            total_bytes = got
            if cfg.fetch_audio and profile.include_audio:
                a_bytes = manifest.audio_segment_bytes(i)
                a_path = manifest.audio_url_template.format(segment_index=i)
                # the audio request goes out while video bytes still stream,
                # so it pays no extra first-byte RTT
                t_a, a_got = self.link.download(self.t, a_bytes, a_path, pipelined=True)
                self.advance(t_a)
                total_bytes += a_got
            self.samples.append((total_bytes, self.t - t_req))

        # end of stream: force playback of whatever is buffered
        if self.state == "startup":
            self.emit(STARTUP_COMPLETE)
            self.state = "playing"
        elif self.state == "stalled":
            self.emit(STALL_END)
            self.state = "playing"
        self.content_done = True
        self.advance(self.link.sleep_until(self.t + self.buffer))
        self.emit(END)
        return self.log


def run_playback(manifest: Manifest, link, config: PlayerConfig, seed: int,
                 registry: Optional[AbrRegistry] = None,
                 trajectory_name: str = "") -> EventLog:
    """Run one full playback session and return its event log."""
    registry = registry or default_registry()
    policy = registry.get(config.abr)
    if isinstance(link, VirtualLink) and not trajectory_name:
        trajectory_name = link.traj.name
    player = _Player(manifest, link, config, seed, policy, trajectory_name)
    try:
        return player.run()
    except requests.RequestException:
        player.log.status = "failed"
        return player.log
