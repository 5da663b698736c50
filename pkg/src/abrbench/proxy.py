"""Wall-clock shaping proxy: relays TCP flows while a token bucket tracks the
active trajectory stage's bandwidth, with per-chunk delay and optional loss."""

from __future__ import annotations

import json
import random
import socket
import threading
import time
from collections import deque
from typing import Optional

from .link import Trajectory

CHUNK = 16384
REFILL_INTERVAL_S = 0.010  # burst = one refill interval of bytes at stage rate


class _TokenBucket:
    """Byte-rate limiter shared across all proxied connections."""

    def __init__(self, traj: Trajectory):
        self.traj = traj
        self._lock = threading.Condition()
        self._tokens = 0.0
        self._t0: Optional[float] = None
        self._last_refill: Optional[float] = None
        self._grants: deque[tuple[float, int]] = deque()
        self.forwarded_bytes = 0

    def start(self):
        now = time.monotonic()
        with self._lock:
            self._t0 = now
            self._last_refill = now

    def elapsed(self) -> float:
        return time.monotonic() - self._t0

    def current_rate_bytes_s(self) -> float:
        return self.traj.params_at(self.elapsed()).bandwidth_kbps * 1000.0 / 8.0

    def _refill_locked(self):
        now = time.monotonic()
        dt = now - self._last_refill
        if dt <= 0:
            return
        rate = self.current_rate_bytes_s()
        self._tokens = min(self._tokens + rate * dt, rate * REFILL_INTERVAL_S)
        self._last_refill = now

    def consume(self, n: int, shutdown: threading.Event) -> bool:
        """Block until `n` bytes of credit are granted; False on shutdown."""
        remaining = n
        while remaining > 0:
            if shutdown.is_set():
                return False
            with self._lock:
                self._refill_locked()
                grant = int(min(remaining, self._tokens))
                if grant > 0:
                    self._tokens -= grant
                    remaining -= grant
                    now = time.monotonic()
                    self.forwarded_bytes += grant
                    self._grants.append((now, grant))
                    while self._grants and self._grants[0][0] < now - 2.0:
                        self._grants.popleft()
            if remaining > 0:
                time.sleep(REFILL_INTERVAL_S / 2)
        return True

    def measured_rate_kbps(self, window_s: float = 1.0) -> float:
        now = time.monotonic()
        total = sum(g for ts, g in self._grants if ts >= now - window_s)
        return total * 8.0 / 1000.0 / window_s


class ShapingProxy:
    def __init__(self, traj: Trajectory, listen: tuple[str, int], upstream: tuple[str, int],
                 seed: int = 0, stats_path: Optional[str] = None, stats_interval_s: float = 1.0):
        self.traj = traj
        self.upstream = upstream
        self.bucket = _TokenBucket(traj)
        self.rng = random.Random(seed)
        self.stats_path = stats_path
        self.stats_interval_s = stats_interval_s
        self._shutdown = threading.Event()
        self._threads: list[threading.Thread] = []
        self._listener = socket.create_server(listen)
        self._listener.settimeout(0.2)

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    def start(self) -> "ShapingProxy":
        self.bucket.start()
        t = threading.Thread(target=self._accept_loop, daemon=True)
        t.start()
        self._threads.append(t)
        if self.stats_path:
            st = threading.Thread(target=self._stats_loop, daemon=True)
            st.start()
            self._threads.append(st)
        return self

    def stop(self):
        self._shutdown.set()
        for t in self._threads:
            t.join(timeout=3)
        self._listener.close()

    def stats(self) -> dict:
        elapsed = self.bucket.elapsed()
        params = self.traj.params_at(elapsed)
        return {
            "elapsed_s": elapsed,
            "stage_bandwidth_kbps": params.bandwidth_kbps,
            "stage_delay_ms": params.delay_ms,
            "stage_loss_pct": params.loss_pct,
            "forwarded_bytes": self.bucket.forwarded_bytes,
            "measured_rate_kbps": self.bucket.measured_rate_kbps(),
        }

    def _stats_loop(self):
        with open(self.stats_path, "a") as f:
            while not self._shutdown.wait(self.stats_interval_s):
                f.write(json.dumps(self.stats()) + "\n")
                f.flush()

    def _accept_loop(self):
        while not self._shutdown.is_set():
            try:
                client, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            threading.Thread(target=self._handle, args=(client,), daemon=True).start()

    def _handle(self, client: socket.socket):
        try:
            up = socket.create_connection(self.upstream, timeout=10)
        except OSError:
            client.close()
            return
        # requests upstream see the one-way delay; responses are shaped + delayed
        a = threading.Thread(target=self._pump, args=(client, up, False), daemon=True)
        b = threading.Thread(target=self._pump, args=(up, client, True), daemon=True)
        a.start()
        b.start()
        a.join()
        b.join()
        for s in (client, up):
            try:
                s.close()
            except OSError:
                pass

    def _pump(self, src: socket.socket, dst: socket.socket, shaped: bool):
        try:
            while not self._shutdown.is_set():
                data = src.recv(CHUNK)
                if not data:
                    try:
                        dst.shutdown(socket.SHUT_WR)
                    except OSError:
                        pass
                    return
                params = self.traj.params_at(self.bucket.elapsed())
                if params.delay_ms > 0:
                    time.sleep(params.delay_ms / 1000.0)
                if shaped:
                    if params.loss_pct > 0 and self.rng.random() < params.loss_pct / 100.0:
                        continue
                    if not self.bucket.consume(len(data), self._shutdown):
                        return
                dst.sendall(data)
        except OSError:
            return


def start_shaping_proxy(traj: Trajectory, listen: tuple[str, int], upstream: tuple[str, int],
                        **kwargs) -> ShapingProxy:
    return ShapingProxy(traj, listen, upstream, **kwargs).start()
