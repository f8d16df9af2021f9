import json

import pytest

from metaselect import learners
from metaselect.errors import MetaselectError
from metaselect.experiment import (
    ExperimentError, derive_seed, load_manifest, manifest_from_dict, run_experiment)
from metaselect.report import (
    TABLE_COLUMNS, body_json, csv_text, emit_report, load_report, text_table,
    validate_report)

from conftest import ALL_ALGORITHMS, dataset_entry, write_noisy_csv, write_separable_csv


def _manifest(tmp_path, **overrides):
    doc = json.loads((tmp_path / "manifest.json").read_text())
    doc.update(overrides)
    return manifest_from_dict(doc, tmp_path)


def test_two_runs_identical_bodies(three_set_manifest):
    m = load_manifest(three_set_manifest)
    a, b = run_experiment(m), run_experiment(m)
    assert body_json(a) == body_json(b)


def test_report_contents(three_set_manifest):
    report = run_experiment(load_manifest(three_set_manifest))
    validate_report(report)
    assert [r.algorithm_id for r in report.rows] == ALL_ALGORITHMS
    assert set(report.strategies) == {"rules", "meta"}
    names = [e["dataset"] for e in report.experience]
    assert names[:2] == ["a", "b"]
    assert names[2:] == ["src"] or all(n.startswith("src_s") for n in names[2:])
    # observed recall comes from sets sharing the test schema (b has fewer columns)
    assert "b" not in report.provenance["evaluated_on_test"]
    for r in report.rows:
        assert r.n_observations == 2 * len(report.provenance["evaluated_on_test"])
        assert r.ci_lower <= r.observed_mean_recall <= r.ci_upper
        assert r.mean_runtime >= 0.0
    assert report.interval_alpha == pytest.approx(0.10 / 5)
    assert report.provenance["aggregation"].startswith("simple mean")


def test_seed_sensitivity_and_env_override(tmp_path, three_set_manifest, monkeypatch):
    base = run_experiment(_manifest(tmp_path))
    other = run_experiment(_manifest(tmp_path, seed=12))
    assert body_json(base) != body_json(other)
    monkeypatch.setenv("METASELECT_SEED", "12")
    env = run_experiment(_manifest(tmp_path))
    assert env.provenance["seed"] == 12 and env.provenance["seed_source"] == "METASELECT_SEED"
    assert [r.observed_mean_recall for r in env.rows] == [r.observed_mean_recall
                                                          for r in other.rows]


def test_degenerate_single_candidate(tmp_path):
    write_noisy_csv(tmp_path / "only.csv", 80, 5)
    write_noisy_csv(tmp_path / "test.csv", 60, 6)
    doc = {"version": 1, "repetitions": 1, "candidates": ["naive_bayes"],
           "training_datasets": [dataset_entry("only", tmp_path / "only.csv")],
           "test_dataset": dataset_entry("test", tmp_path / "test.csv")}
    report = run_experiment(manifest_from_dict(doc, tmp_path))
    assert len(report.rows) == 1
    row = report.rows[0]
    assert row.sd_observed_recall == 0.0 and row.observed_rank == 1
    assert report.strategies["rules"].recall_efficiency == 1.0
    assert report.strategies["rules"].spearman is None
    assert any("meta-learner not trained" in w for w in report.warnings)
    validate_report(report)


def test_fallback_to_test_splits(tmp_path):
    write_noisy_csv(tmp_path / "x.csv", 90, 7, n_numeric=2)
    write_noisy_csv(tmp_path / "y.csv", 90, 8, n_numeric=4)
    write_noisy_csv(tmp_path / "test.csv", 120, 9)
    doc = {"version": 1, "repetitions": 2, "candidates": ["decision_tree", "naive_bayes"],
           "training_datasets": [dataset_entry("x", tmp_path / "x.csv"),
                                 dataset_entry("y", tmp_path / "y.csv")],
           "test_dataset": dataset_entry("test", tmp_path / "test.csv")}
    report = run_experiment(manifest_from_dict(doc, tmp_path))
    assert report.provenance["observed_source"] == "test_dataset_splits"
    assert all(r.n_observations == 2 for r in report.rows)
    assert "meta" in report.strategies


def test_whole_dataset_leakage_mode(tmp_path, three_set_manifest):
    report = run_experiment(_manifest(tmp_path, leakage_mode="paper", repetitions=1))
    assert report.provenance["leakage_mode"] == "paper"
    validate_report(report)


def test_characterization_selects_candidates(tmp_path, three_set_manifest,
                                             ids_characterization):
    doc = json.loads(three_set_manifest.read_text())
    del doc["candidates"]
    doc["characterization"] = ids_characterization.name
    doc["repetitions"] = 1
    report = run_experiment(manifest_from_dict(doc, tmp_path))
    assert [r.algorithm_id for r in report.rows] == ALL_ALGORITHMS


def test_failed_cell_is_tagged(tmp_path, three_set_manifest, monkeypatch):
    real = learners.measure_runtime

    def flaky(spec, *args):
        if spec.algorithm_id == "kernel_svc":
            raise RuntimeError("solver exploded")
        return real(spec, *args)

    monkeypatch.setattr(learners, "measure_runtime", flaky)
    m = _manifest(tmp_path, repetitions=1)
    with pytest.raises(ExperimentError, match=r"\[dataset=a, algorithm=kernel_svc, "
                                              r"repetition=0\] solver exploded"):
        run_experiment(m)
    with pytest.raises(ExperimentError, match="no successful test evaluations"):
        run_experiment(m, keep_going=True)


def test_keep_going_records_failures(tmp_path, three_set_manifest, monkeypatch):
    real = learners.measure_runtime

    def flaky(spec, X, y, Xt):
        if spec.algorithm_id == "kernel_svc" and X.rows < 100:
            raise RuntimeError("too small")
        return real(spec, X, y, Xt)

    monkeypatch.setattr(learners, "measure_runtime", flaky)
    report = run_experiment(_manifest(tmp_path, repetitions=1), keep_going=True)
    assert report.failures and all(f["algorithm"] == "kernel_svc" for f in report.failures)
    assert "too small" in report.failures[0]["error"]


@pytest.mark.parametrize("change,match", [
    ({"version": 2}, "version"),
    ({"repetitions": 0}, "repetitions"),
    ({"split_ratio": 1.0}, "split_ratio"),
    ({"leakage_mode": "loose"}, "leakage_mode"),
    ({"candidates": ["gradient_boosting"]}, "no base learner"),
])
def test_manifest_validation(tmp_path, three_set_manifest, change, match):
    with pytest.raises(MetaselectError, match=match):
        run_experiment(_manifest(tmp_path, **change))


def test_derive_seed():
    assert derive_seed(1, "a", 0) == derive_seed(1, "a", 0)
    assert derive_seed(1, "a", 0) != derive_seed(1, "a", 1)
    assert 0 <= derive_seed(9, "x") < 2**63


def test_emit_and_reload(tmp_path, three_set_manifest):
    report = run_experiment(_manifest(tmp_path, repetitions=2))
    paths = emit_report(report, tmp_path / "out")
    assert [p.name for p in paths] == ["report.json", "report.txt", "report.csv"]
    assert load_report(tmp_path / "out" / "report.json") == report
    header = text_table(report).splitlines()[0]
    positions = [header.index(c) for c in TABLE_COLUMNS]
    assert positions == sorted(positions)
    assert len(csv_text(report).strip().splitlines()) == 1 + len(ALL_ALGORITHMS)
    with pytest.raises(MetaselectError):
        emit_report(report, tmp_path / "out" / "report.json")


def test_separable_manifest_high_recall(tmp_path):
    for i, n in enumerate((400, 500)):
        write_separable_csv(tmp_path / f"t{i}.csv", n, i)
    write_separable_csv(tmp_path / "test.csv", 600, 9)
    doc = {"version": 1, "repetitions": 1, "candidates": ALL_ALGORITHMS,
           "training_datasets": [dataset_entry(f"t{i}", tmp_path / f"t{i}.csv")
                                 for i in range(2)],
           "test_dataset": dataset_entry("test", tmp_path / "test.csv")}
    report = run_experiment(manifest_from_dict(doc, tmp_path))
    assert min(r.observed_mean_recall for r in report.rows) >= 0.99


def test_worker_count_does_not_change_body(tmp_path, three_set_manifest):
    m = _manifest(tmp_path, repetitions=1)
    assert body_json(run_experiment(m, workers=1)) == body_json(run_experiment(m, workers=2))
