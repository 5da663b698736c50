"""Minimal HTTP origin serving the manifest and synthetic media segments."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .media import Manifest, build_manifest, ContentProfile, segment_payload


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 0  # 0 picks a free port
    profile: ContentProfile = None
    request_log_path: Optional[str] = None


class SegmentServer:
    def __init__(self, config: ServerConfig):
        if config.profile is None:
            raise ValueError("ServerConfig.profile is required")
        config.profile.validate()
        self.manifest: Manifest = build_manifest(config.profile)
        self.config = config
        self._log_lock = threading.Lock()
        self._log_file = open(config.request_log_path, "a") if config.request_log_path else None

        manifest = self.manifest
        outer = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                pass

            def _reply(self, status: int, body: bytes, ctype="application/octet-stream"):
                self.send_response(status)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
                outer._log_request(self.path, status, len(body))

            def do_GET(self):
                profile = manifest.profile
                parts = [p for p in self.path.split("/") if p]
                if self.path == "/manifest.json":
                    body = json.dumps(manifest.to_dict()).encode()
                    return self._reply(200, body, "application/json")
                try:
                    if len(parts) == 3 and parts[0] == "video":
                        rep_id, idx = int(parts[1]), int(parts[2])
                        if not (0 <= rep_id < len(profile.representations)
                                and 0 <= idx < manifest.segment_count):
                            return self._reply(404, b"not found", "text/plain")
                        size = manifest.video_segment_bytes(rep_id, idx)
                        body = segment_payload(profile.name, str(rep_id), idx, size)
                        return self._reply(200, body)
                    if len(parts) == 2 and parts[0] == "audio":
                        idx = int(parts[1])
                        if not (profile.include_audio and 0 <= idx < manifest.segment_count):
                            return self._reply(404, b"not found", "text/plain")
                        size = manifest.audio_segment_bytes(idx)
                        body = segment_payload(profile.name, "audio", idx, size)
                        return self._reply(200, body)
                except ValueError:
                    return self._reply(400, b"bad request", "text/plain")
                return self._reply(404, b"not found", "text/plain")

        self._httpd = ThreadingHTTPServer((config.host, config.port), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    def _log_request(self, path: str, status: int, nbytes: int):
        if self._log_file is None:
            return
        line = json.dumps({"ts": time.time(), "path": path, "status": status, "bytes": nbytes})
        with self._log_lock:
            self._log_file.write(line + "\n")
            self._log_file.flush()

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    @property
    def base_url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "SegmentServer":
        self._thread.start()
        return self

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)
        if self._log_file:
            self._log_file.close()


def serve(config: ServerConfig) -> SegmentServer:
    return SegmentServer(config).start()
