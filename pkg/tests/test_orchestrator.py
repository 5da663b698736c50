import csv
import io
import json

import pytest

from abrbench.metrics import aggregate_runs
from abrbench.orchestrator import (
    ConfigError,
    ExperimentConfig,
    export_results,
    list_runs,
    run_batch,
    run_experiment,
)
from abrbench.store import ResultsStore
from conftest import PAPER_TRAJECTORY


def make_config(**overrides):
    base = dict(
        name="demo",
        profile="fullhd",
        trajectory=str(PAPER_TRAJECTORY),
        abr="throughput",
        runs=2,
        seed_base=0,
    )
    base.update(overrides)
    return ExperimentConfig.from_dict(base)


@pytest.fixture()
def store(tmp_path):
    return ResultsStore(tmp_path / "results")


class TestConfigValidation:
    def test_missing_fields(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"name": "x"})

    def test_unknown_fields(self):
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_dict({"name": "x", "profile": "fullhd",
                                        "trajectory": "t", "bogus": 1})

    def test_bad_mode(self):
        with pytest.raises(ConfigError):
            make_config(mode="quantum")

    def test_bad_runs(self):
        with pytest.raises(ConfigError):
            make_config(runs=0)

    def test_unresolvable_trajectory_fails_before_any_run(self, store):
        config = make_config(trajectory="/nonexistent/path.json")
        with pytest.raises(ConfigError):
            run_experiment(config, store)
        assert store.records() == []

    def test_unknown_abr_fails_before_any_run(self, store):
        config = make_config(abr="mystery")
        with pytest.raises(KeyError):
            run_experiment(config, store)
        assert store.records() == []


class TestRunExperiment:
    def test_five_runs_persisted(self, store):
        config = make_config(runs=5)
        exp_id, records, aggregate = run_experiment(config, store)
        assert len(records) == 5
        assert [r.seed for r in records] == [0, 1, 2, 3, 4]
        assert all(r.status == "ok" for r in records)
        assert aggregate.n_runs == 5

    def test_single_run_aggregate_equals_report(self, store):
        config = make_config(runs=1)
        exp_id, records, aggregate = run_experiment(config, store)
        report = store.load_report(records[0])
        for name, mean in aggregate.mean.items():
            v = report.scalars()[name]
            if mean is None:
                continue
            assert mean == pytest.approx(v)
            assert aggregate.stddev[name] == 0.0

    def test_rerun_with_same_seeds_is_byte_identical(self, store):
        config = make_config(runs=2)
        _, recs_a, _ = run_experiment(config, store)
        _, recs_b, _ = run_experiment(config, store)
        for a, b in zip(recs_a, recs_b):
            assert store.load_log(a).to_jsonl() == store.load_log(b).to_jsonl()

    def test_reruns_append_not_overwrite(self, store):
        config = make_config(runs=1)
        id_a, _, _ = run_experiment(config, store)
        id_b, _, _ = run_experiment(config, store)
        assert id_a != id_b
        assert len(store.records(name="demo")) == 2


class TestStore:
    def test_index_rebuilt_from_disk_matches(self, store):
        run_experiment(make_config(runs=2), store)
        rebuilt = ResultsStore(store.root)
        assert [r.to_dict() for r in rebuilt.records()] == \
            [r.to_dict() for r in store.records()]

    def test_selector_by_abr_and_profile(self, store):
        run_experiment(make_config(runs=1, abr="throughput"), store)
        run_experiment(make_config(name="other", runs=1, abr="buffer"), store)
        assert all(r.experiment_name == "demo"
                   for r in store.records(abr="throughput"))
        assert all(r.experiment_name == "other"
                   for r in store.records(abr="buffer"))
        assert len(store.records(profile="fullhd")) == 2


class TestExport:
    def test_csv_has_run_rows(self, store):
        run_experiment(make_config(runs=3), store)
        body = export_results(store, {"name": "demo"}, fmt="csv")
        rows = list(csv.DictReader(io.StringIO(body)))
        assert len(rows) == 3
        assert all(float(r["avg_download_bitrate_kbps"]) > 0 for r in rows)

    def test_empty_selection_is_empty_not_error(self, store):
        body = export_results(store, {"name": "nothing"}, fmt="csv")
        assert list(csv.DictReader(io.StringIO(body))) == []
        assert json.loads(export_results(store, {"name": "nothing"}, fmt="json")) == []

    def test_json_export_round_trips_against_stored_reports(self, store):
        exp_id, records, aggregate = run_experiment(make_config(runs=2), store)
        rows = json.loads(export_results(store, {"experiment_id": exp_id}, fmt="json"))
        reports = [store.load_report(r) for r in records]
        for row, report in zip(rows, reports):
            for name, v in report.scalars().items():
                if v is None or v != v:
                    continue
                import math
                if math.isinf(v):
                    continue
                assert row[name] == pytest.approx(v)
        # offline aggregate equals persisted aggregate
        offline = aggregate_runs(reports)
        assert offline.mean == aggregate.mean

    def test_list_runs_matches_export_rows(self, store):
        run_experiment(make_config(runs=2), store)
        assert len(list_runs(store, {"name": "demo"})) == 2


class TestBatch:
    def test_batch_runs_all_configs(self, store, tmp_path):
        cfg_dir = tmp_path / "configs"
        cfg_dir.mkdir()
        for i in range(3):
            doc = dict(name=f"batch{i}", profile="fullhd",
                       trajectory=str(PAPER_TRAJECTORY), runs=1)
            (cfg_dir / f"{i}.json").write_text(json.dumps(doc))
        exp_ids = run_batch(cfg_dir, store)
        assert len(exp_ids) == 3
        assert len(store.records()) == 3
