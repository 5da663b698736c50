"""Command-line interface for the testbed."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .link import load_trajectory
from .media import builtin_profile, build_manifest
from .orchestrator import (ConfigError, ExperimentConfig, export_results, list_runs,
                           run_batch, run_experiment)
from .origin import ServerConfig, serve
from .player import default_registry
from .proxy import start_shaping_proxy
from .store import ResultsStore

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

DEFAULT_TRAJECTORIES = Path(__file__).resolve().parents[2] / "trajectories"


def _store() -> ResultsStore:
    root = os.environ.get("ABRBENCH_STORE", "./results")
    return ResultsStore(root)


@click.group()
def main():
    """ABR streaming testbed."""


@main.command("run")
@click.argument("config_path", type=click.Path(exists=True))
def run_cmd(config_path):
    """Run one experiment from a JSON config file."""
    try:
        config = ExperimentConfig.from_json_file(config_path)
        exp_id, records, aggregate = run_experiment(
            config, _store(), trajectories_dir=DEFAULT_TRAJECTORIES)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    except Exception as e:
        click.echo(f"runtime failure: {e}", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo(f"experiment {exp_id}: {len(records)} runs")
    if aggregate:
        click.echo(json.dumps(aggregate.mean, indent=2, sort_keys=True))


@main.command("batch")
@click.argument("config_dir", type=click.Path(exists=True, file_okay=False))
def batch_cmd(config_dir):
    """Run every *.json experiment config in a directory."""
    try:
        exp_ids = run_batch(config_dir, _store(), trajectories_dir=DEFAULT_TRAJECTORIES)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    except Exception as e:
        click.echo(f"runtime failure: {e}", err=True)
        sys.exit(EXIT_RUNTIME)
    for exp_id in exp_ids:
        click.echo(exp_id)


@main.command("list")
@click.option("--name", default=None)
@click.option("--abr", default=None)
@click.option("--profile", default=None)
def list_cmd(name, abr, profile):
    """List stored run records."""
    for rec in list_runs(_store(), {"name": name, "abr": abr, "profile": profile}):
        click.echo(json.dumps(rec, sort_keys=True))


@main.command("report")
@click.argument("experiment_id")
def report_cmd(experiment_id):
    """Print the aggregate report of one experiment."""
    store = _store()
    aggregate = store.load_aggregate(experiment_id)
    if aggregate is None:
        click.echo(f"no aggregate for {experiment_id!r}", err=True)
        sys.exit(EXIT_VALIDATION)
    click.echo(json.dumps(aggregate.to_dict(), indent=2, sort_keys=True))


@main.command("export")
@click.option("--name", default=None)
@click.option("--abr", default=None)
@click.option("--profile", default=None)
@click.option("--experiment-id", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
def export_cmd(name, abr, profile, experiment_id, fmt):
    """Export run metrics for offline analysis."""
    selector = {"name": name, "abr": abr, "profile": profile, "experiment_id": experiment_id}
    body = export_results(_store(), {k: v for k, v in selector.items() if v}, fmt=fmt)
    click.echo(body, nl=False)


@main.command("list-abr")
def list_abr_cmd():
    """List registered ABR policies."""
    for name in default_registry().names():
        click.echo(name)


@main.command("serve")
@click.option("--api", "api_addr", default="127.0.0.1:8000", show_default=True,
              help="host:port for the control API")
def serve_cmd(api_addr):
    """Serve the control API (and the web console, if built)."""
    import uvicorn
    from .api import create_app

    host, port = api_addr.rsplit(":", 1)
    app = create_app(_store(), trajectories_dir=DEFAULT_TRAJECTORIES)
    console_dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if console_dist.exists():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=console_dist, html=True), name="console")
    uvicorn.run(app, host=host, port=int(port))


@main.command("serve-origin")
@click.option("--profile", default="fullhd", show_default=True)
@click.option("--bind", default="127.0.0.1:8080", show_default=True)
@click.option("--request-log", default=None, type=click.Path())
@click.option("--total-duration", default=630.0, show_default=True)
def serve_origin_cmd(profile, bind, request_log, total_duration):
    """Serve the synthetic segment origin."""
    host, port = bind.rsplit(":", 1)
    try:
        prof = builtin_profile(profile, total_duration_s=total_duration)
    except KeyError as e:
        click.echo(str(e), err=True)
        sys.exit(EXIT_VALIDATION)
    srv = serve(ServerConfig(host=host, port=int(port), profile=prof,
                             request_log_path=request_log))
    click.echo(f"origin serving {profile} at {srv.base_url}")
    try:
        srv._thread.join()
    except KeyboardInterrupt:
        srv.stop()


@main.command("shape")
@click.option("--listen", default="127.0.0.1:8081", show_default=True)
@click.option("--upstream", required=True, help="host:port of the origin")
@click.option("--trajectory", "trajectory_path", required=True, type=click.Path(exists=True))
@click.option("--stats-path", default=None, type=click.Path())
@click.option("--stats-interval", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def shape_cmd(listen, upstream, trajectory_path, stats_path, stats_interval, seed):
    """Run the wall-clock shaping proxy over a trajectory."""
    lhost, lport = listen.rsplit(":", 1)
    uhost, uport = upstream.rsplit(":", 1)
    try:
        traj = load_trajectory(trajectory_path)
    except ValueError as e:
        click.echo(str(e), err=True)
        sys.exit(EXIT_VALIDATION)
    proxy = start_shaping_proxy(traj, (lhost, int(lport)), (uhost, int(uport)),
                                seed=seed, stats_path=stats_path,
                                stats_interval_s=stats_interval)
    host, port = proxy.address
    click.echo(f"shaping proxy on {host}:{port} -> {upstream}")
    try:
        import time
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        proxy.stop()


if __name__ == "__main__":
    main()
