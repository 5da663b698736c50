"""HTTP control API: submit experiments, watch live telemetry, fetch reports.

One experiment executes at a time; submissions queue FIFO on a worker thread.
"""

from __future__ import annotations

import queue
import threading
import traceback
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, ValidationError

from .link import load_trajectory
from .media import builtin_profile
from .orchestrator import (ConfigError, ExperimentConfig, export_results, run_experiment)
from .player import AbrRegistry, default_registry
from .store import ResultsStore


class ExperimentSubmission(BaseModel):
    name: str
    profile: str
    trajectory: Optional[str] = None
    trajectory_doc: Optional[dict] = None
    abr: str = "throughput"
    abr_params: dict = {}
    player: dict = {}
    runs: int = 5
    mode: str = "virtual"
    seed_base: int = 0
    total_duration_s: Optional[float] = None
    proxy_url: Optional[str] = None


class _Job:
    def __init__(self, job_id: str, config: ExperimentConfig):
        self.id = job_id
        self.config = config
        self.status = "queued"  # queued | running | done | failed
        self.experiment_id: Optional[str] = None
        self.error: Optional[str] = None
        self.telemetry: list[dict] = []
        self.lock = threading.Lock()

    def push_telemetry(self, run_index: int, event):
        if event.kind in ("BufferSample", "SegmentCompleted", "StallStart", "StallEnd"):
            item = {"run": run_index, "t": event.t, "kind": event.kind, **event.data}
            with self.lock:
                self.telemetry.append(item)

    def summary(self) -> dict:
        return {
            "id": self.id,
            "name": self.config.name,
            "status": self.status,
            "experiment_id": self.experiment_id,
            "error": self.error,
        }


class Executor:
    def __init__(self, store: ResultsStore, registry: AbrRegistry,
                 trajectories_dir: Optional[Path] = None):
        self.store = store
        self.registry = registry
        self.trajectories_dir = trajectories_dir
        self.jobs: dict[str, _Job] = {}
        self.order: list[str] = []
        self._queue: queue.Queue[Optional[_Job]] = queue.Queue()
        self._counter = 0
        self._lock = threading.Lock()
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def submit(self, config: ExperimentConfig) -> _Job:
        with self._lock:
            self._counter += 1
            job = _Job(f"job-{self._counter:04d}", config)
            self.jobs[job.id] = job
            self.order.append(job.id)
        self._queue.put(job)
        return job

    def _loop(self):
        while True:
            job = self._queue.get()
            if job is None:
                return
            job.status = "running"
            try:
                exp_id, _, _ = run_experiment(
                    job.config, self.store, registry=self.registry,
                    trajectories_dir=self.trajectories_dir,
                    on_event=job.push_telemetry)
                job.experiment_id = exp_id
                job.status = "done"
            except Exception as e:  # recorded on the job, queue keeps going
                job.error = f"{type(e).__name__}: {e}"
                job.status = "failed"
                traceback.print_exc()

    def shutdown(self):
        self._queue.put(None)
        self._thread.join(timeout=5)

    def wait_idle(self, timeout: float = 60.0):
        import time
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if all(j.status in ("done", "failed") for j in self.jobs.values()):
                return
            time.sleep(0.02)
        raise TimeoutError("executor did not drain in time")


def create_app(store: ResultsStore, registry: Optional[AbrRegistry] = None,
               trajectories_dir: Optional[Path] = None) -> FastAPI:
    registry = registry or default_registry()
    app = FastAPI(title="abrbench control API")
    executor = Executor(store, registry, trajectories_dir)
    app.state.executor = executor

    @app.get("/api/profiles")
    def profiles():
        out = []
        for name in ("fullhd", "amazon"):
            p = builtin_profile(name)
            out.append({"name": name,
                        "representations": [
                            {"id": r.id, "bitrate_kbps": r.bitrate_kbps,
                             "width": r.width, "height": r.height}
                            for r in p.representations]})
        return out

    @app.get("/api/trajectories")
    def trajectories():
        if trajectories_dir is None:
            return []
        out = []
        for path in sorted(Path(trajectories_dir).glob("*.json")):
            traj = load_trajectory(path)
            out.append({"name": path.stem, **traj.to_dict()})
        return out

    @app.get("/api/abr")
    def abr_policies():
        return registry.names()

    @app.post("/api/experiments", status_code=202)
    def submit(submission: ExperimentSubmission):
        doc = submission.model_dump(exclude_none=True)
        try:
            config = ExperimentConfig.from_dict(doc)
            # resolve early so bad configs 422 instead of failing in the queue
            from .orchestrator import resolve_manifest, resolve_trajectory
            resolve_manifest(config)
            resolve_trajectory(config, trajectories_dir)
            registry.get(config.abr)
        except (ConfigError, KeyError) as e:
            raise HTTPException(status_code=422, detail=str(e))
        job = executor.submit(config)
        return {"id": job.id}

    @app.get("/api/experiments")
    def list_experiments():
        return [executor.jobs[jid].summary() for jid in executor.order]

    def _job(job_id: str) -> _Job:
        job = executor.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown experiment {job_id!r}")
        return job

    @app.get("/api/experiments/{job_id}")
    def get_experiment(job_id: str):
        return _job(job_id).summary()

    @app.get("/api/experiments/{job_id}/telemetry")
    def telemetry(job_id: str, cursor: int = Query(0, ge=0)):
        job = _job(job_id)
        with job.lock:
            items = job.telemetry[cursor:]
            new_cursor = cursor + len(items)
        return {"cursor": new_cursor, "items": items, "status": job.status}

    @app.get("/api/experiments/{job_id}/report")
    def report(job_id: str):
        job = _job(job_id)
        if job.status != "done":
            raise HTTPException(status_code=404, detail=f"experiment {job_id!r} not finished")
        aggregate = store.load_aggregate(job.experiment_id)
        runs = []
        for rec in store.records(experiment_id=job.experiment_id):
            rep = store.load_report(rec)
            runs.append({"run_index": rec.run_index, "seed": rec.seed, "status": rec.status,
                         "scalars": rep.scalars() if rep else None})
        return {"experiment_id": job.experiment_id,
                "aggregate": aggregate.to_dict() if aggregate else None,
                "runs": runs}

    @app.get("/api/export")
    def export(name: Optional[str] = None, abr: Optional[str] = None,
               profile: Optional[str] = None, experiment_id: Optional[str] = None,
               format: str = "csv"):
        selector = {"name": name, "abr": abr, "profile": profile,
                    "experiment_id": experiment_id}
        body = export_results(store, {k: v for k, v in selector.items() if v}, fmt=format)
        from fastapi.responses import PlainTextResponse
        media = "text/csv" if format == "csv" else "application/json"
        return PlainTextResponse(body, media_type=media)

    return app
