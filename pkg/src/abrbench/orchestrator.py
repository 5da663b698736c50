"""Experiment definition and batch execution against the results store."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import media
from .link import Trajectory, load_trajectory, trajectory_from_dict
from .media import Manifest, build_manifest, builtin_profile
from .metrics import AggregateReport, MetricsReport, aggregate_runs, compute_report, SCALAR_FIELDS
from .player import (AbrRegistry, HttpLink, PlayerConfig, VirtualLink, default_registry,
                     run_playback)
from .store import ResultsStore, RunRecord


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    name: str
    profile: str  # built-in name or manifest path
    trajectory: str  # path, built-in name, or inline dict via trajectory_doc
    abr: str = "throughput"
    abr_params: dict = field(default_factory=dict)
    player: dict = field(default_factory=dict)
    runs: int = 5
    mode: str = "virtual"  # virtual | proxy
    seed_base: int = 0
    total_duration_s: Optional[float] = None
    trajectory_doc: Optional[dict] = None
    proxy_url: Optional[str] = None  # required for mode=proxy

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "name" not in d or "profile" not in d:
            raise ConfigError("config requires 'name' and 'profile'")
        if "trajectory" not in d and "trajectory_doc" not in d:
            raise ConfigError("config requires 'trajectory' or 'trajectory_doc'")
        cfg = cls(**{**{"trajectory": ""}, **d})
        if cfg.runs < 1:
            raise ConfigError("runs must be >= 1")
        if cfg.mode not in ("virtual", "proxy"):
            raise ConfigError(f"mode must be 'virtual' or 'proxy', got {cfg.mode!r}")
        return cfg

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: malformed JSON: {e.msg}") from None
        return cls.from_dict(doc)


def resolve_manifest(config: ExperimentConfig) -> Manifest:
    name_or_path = config.profile
    if name_or_path in ("fullhd", "amazon"):
        total = config.total_duration_s or 630.0
        return build_manifest(builtin_profile(name_or_path, total_duration_s=total))
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(f"profile {name_or_path!r} is neither built-in nor a manifest file")
    return media.manifest_from_dict(json.loads(path.read_text()))


def resolve_trajectory(config: ExperimentConfig,
                       trajectories_dir: Optional[Path] = None) -> Trajectory:
    if config.trajectory_doc is not None:
        return trajectory_from_dict(config.trajectory_doc, name=config.trajectory or "inline")
    path = Path(config.trajectory)
    if path.exists():
        return load_trajectory(path)
    if trajectories_dir is not None:
        candidate = trajectories_dir / f"{config.trajectory}.json"
        if candidate.exists():
            return load_trajectory(candidate)
    raise ConfigError(f"trajectory {config.trajectory!r} not found")


def _player_config(config: ExperimentConfig) -> PlayerConfig:
    try:
        return PlayerConfig(abr=config.abr, abr_params=config.abr_params, **config.player)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid player config: {e}") from None


def run_experiment(config: ExperimentConfig, store: ResultsStore,
                   registry: Optional[AbrRegistry] = None,
                   trajectories_dir: Optional[Path] = None,
                   on_event=None) -> tuple[str, list[RunRecord], AggregateReport]:
    """Execute all runs of one experiment, persisting logs and reports.

    `on_event(run_index, event)` is an optional live-telemetry callback.
    Returns (experiment id, run records, aggregate over successful runs).
    """
    registry = registry or default_registry()
    manifest = resolve_manifest(config)
    traj = resolve_trajectory(config, trajectories_dir)
    player_cfg = _player_config(config)
    registry.get(config.abr)  # fail before any run on unknown policy

    exp_id = store.new_experiment_id(config.name)
    store.save_experiment_config(exp_id, config.to_dict())

    records: list[RunRecord] = []
    reports: list[MetricsReport] = []
    for i in range(config.runs):
        seed = config.seed_base + i
        started = time.time()
        if config.mode == "virtual":
            link = VirtualLink(traj)
        else:
            if not config.proxy_url:
                raise ConfigError("proxy mode requires proxy_url")
            link = HttpLink(config.proxy_url)
        log = run_playback(manifest, link, player_cfg, seed, registry=registry,
                           trajectory_name=traj.name)
        if on_event is not None:
            for ev in log.events:
                on_event(i, ev)
        report = None
        if log.status == "ok":
            report = compute_report(log, traj)
            reports.append(report)
        records.append(store.save_run(exp_id, config.name, i, seed, log, report,
                                      started, time.time()))
    aggregate = aggregate_runs(reports) if reports else None
    if aggregate is not None:
        store.save_aggregate(exp_id, aggregate)
    return exp_id, records, aggregate


def run_batch(config_dir, store: ResultsStore, **kwargs) -> list[str]:
    exp_ids = []
    for path in sorted(Path(config_dir).glob("*.json")):
        config = ExperimentConfig.from_json_file(path)
        exp_id, _, _ = run_experiment(config, store, **kwargs)
        exp_ids.append(exp_id)
    return exp_ids


CSV_COLUMNS = ["experiment_id", "experiment_name", "run_index", "seed", "status",
               *SCALAR_FIELDS]


def export_results(store: ResultsStore, selector: Optional[dict] = None,
                   fmt: str = "csv") -> str:
    """Export run records matching `selector` (experiment_id/name/abr/profile)."""
    selector = selector or {}
    records = store.records(
        experiment_id=selector.get("experiment_id"),
        name=selector.get("name"),
        abr=selector.get("abr"),
        profile=selector.get("profile"),
    )
    rows = []
    for rec in records:
        report = store.load_report(rec)
        row = {
            "experiment_id": rec.experiment_id,
            "experiment_name": rec.experiment_name,
            "run_index": rec.run_index,
            "seed": rec.seed,
            "status": rec.status,
        }
        if report is not None:
            for k, v in report.scalars().items():
                row[k] = v
        rows.append(row)
    if fmt == "json":
        return json.dumps(rows, sort_keys=True, indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in CSV_COLUMNS})
        return buf.getvalue()
    raise ConfigError(f"unknown export format {fmt!r}")


def list_runs(store: ResultsStore, selector: Optional[dict] = None) -> list[dict]:
    selector = selector or {}
    return [r.to_dict() for r in store.records(
        experiment_id=selector.get("experiment_id"),
        name=selector.get("name"),
        abr=selector.get("abr"),
        profile=selector.get("profile"),
    )]
