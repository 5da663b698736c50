"""Append-only file-based results store: one directory per experiment,
one event log + report per run, plus a JSONL index."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .metrics import MetricsReport, AggregateReport
from .player import EventLog


@dataclass
class RunRecord:
    experiment_id: str
    experiment_name: str
    run_index: int
    seed: int
    status: str  # ok | failed
    events_path: str
    report_path: Optional[str]
    started_at: float
    finished_at: float

    def to_dict(self) -> dict:
        return self.__dict__.copy()

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)


class ResultsStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._index: list[RunRecord] = []
        self._load_index()

    @property
    def index_path(self) -> Path:
        return self.root / "index.jsonl"

    def _load_index(self):
        if not self.index_path.exists():
            return
        for line in self.index_path.read_text().splitlines():
            if line.strip():
                self._index.append(RunRecord.from_dict(json.loads(line)))

    def new_experiment_id(self, name: str) -> str:
        with self._lock:
            existing = {p.name for p in self.root.iterdir() if p.is_dir()}
            n = 0
            while f"{name}-{n:04d}" in existing:
                n += 1
            exp_id = f"{name}-{n:04d}"
            (self.root / exp_id).mkdir()
            return exp_id

    def save_experiment_config(self, exp_id: str, config: dict):
        (self.root / exp_id / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True))

    def save_run(self, exp_id: str, name: str, run_index: int, seed: int,
                 log: EventLog, report: Optional[MetricsReport],
                 started_at: float, finished_at: float) -> RunRecord:
        exp_dir = self.root / exp_id
        events_path = exp_dir / f"run_{run_index:03d}.events.jsonl"
        events_path.write_text(log.to_jsonl())
        report_path = None
        if report is not None:
            report_path = exp_dir / f"run_{run_index:03d}.report.json"
            report_path.write_text(report.to_json())
        record = RunRecord(
            experiment_id=exp_id,
            experiment_name=name,
            run_index=run_index,
            seed=seed,
            status=log.status,
            events_path=str(events_path.relative_to(self.root)),
            report_path=str(report_path.relative_to(self.root)) if report_path else None,
            started_at=started_at,
            finished_at=finished_at,
        )
        with self._lock:
            self._index.append(record)
            with open(self.index_path, "a") as f:
                f.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        return record

    def save_aggregate(self, exp_id: str, aggregate: AggregateReport):
        path = self.root / exp_id / "aggregate.json"
        path.write_text(json.dumps(aggregate.to_dict(), indent=2, sort_keys=True))

    def load_aggregate(self, exp_id: str) -> Optional[AggregateReport]:
        path = self.root / exp_id / "aggregate.json"
        if not path.exists():
            return None
        return AggregateReport.from_dict(json.loads(path.read_text()))

    def load_experiment_config(self, exp_id: str) -> Optional[dict]:
        path = self.root / exp_id / "config.json"
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def records(self, experiment_id: Optional[str] = None, name: Optional[str] = None,
                abr: Optional[str] = None, profile: Optional[str] = None) -> list[RunRecord]:
        with self._lock:
            recs = list(self._index)
        if experiment_id:
            recs = [r for r in recs if r.experiment_id == experiment_id]
        if name:
            recs = [r for r in recs if r.experiment_name == name]
        if abr or profile:
            out = []
            for r in recs:
                cfg = self.load_experiment_config(r.experiment_id) or {}
                if abr and cfg.get("abr") != abr:
                    continue
                if profile and cfg.get("profile") != profile:
                    continue
                out.append(r)
            recs = out
        return sorted(recs, key=lambda r: (r.experiment_id, r.run_index))

    def experiment_ids(self) -> list[str]:
        with self._lock:
            return sorted({r.experiment_id for r in self._index})

    def load_log(self, record: RunRecord) -> EventLog:
        return EventLog.from_jsonl((self.root / record.events_path).read_text())

    def load_report(self, record: RunRecord) -> Optional[MetricsReport]:
        if record.report_path is None:
            return None
        return MetricsReport.from_dict(json.loads((self.root / record.report_path).read_text()))

    def rebuild_index(self) -> list[RunRecord]:
        """Recompute the index purely from on-disk artifacts (crash recovery)."""
        fresh = ResultsStore.__new__(ResultsStore)
        fresh.root = self.root
        fresh._lock = threading.Lock()
        fresh._index = []
        fresh._load_index()
        return fresh._index
