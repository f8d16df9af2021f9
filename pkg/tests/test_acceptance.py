"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` (the verdict lines are
printed with capture disabled, so ``-s`` is optional).  The NSL-KDD
reproduction runs only when ``METASELECT_NSLKDD_DIR`` points at a directory
holding ``KDDTrain+.txt`` and ``KDDTest+.txt``.
"""
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import pytest

from metaselect.evaluation import recall_efficiency, spearman, spearman_critical_value
from metaselect.experiment import manifest_from_dict, run_experiment
from metaselect.recommend import RuleTree, rank_meta, rank_rules
from metaselect.report import validate_report
from metaselect.taxonomy import load_registry

from conftest import ALL_ALGORITHMS, dataset_entry, write_separable_csv
from test_recommend import FIVE, KDDTEST_PROFILE, PUBLISHED_PREDICTED, constant_model

TESTS = Path(__file__).resolve().parent

# published observed mean recall per algorithm
PUBLISHED_RECALL = {"decision_tree": 0.9753, "random_forest": 0.9822,
                    "naive_bayes": 0.8634, "kernel_svc": 0.9593, "kernel_svr": 0.9624}


def verdict(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
    assert ok, detail


def test_criterion_1_recall_efficiency(capsys):
    e = recall_efficiency(0.962446436, 0.982216595)
    target, tol = 0.979859, 1e-6
    ok = abs(e - target) <= tol and round(e, 2) == 0.98
    verdict(capsys, 1, "recall efficiency", ok,
            f"E_R = {e:.9f}, required {target} +/- {tol}, rounds to {round(e, 2)}")


def test_criterion_2_rank_arithmetic(capsys):
    observed = [2, 1, 5, 4, 3]
    rho_meta = spearman([5, 3, 2, 4, 1], observed)
    rho_rules = spearman([4, 3, 2, 5, 1], observed)
    crit = spearman_critical_value(5, 0.10)
    ok = (rho_meta == -0.3 and rho_rules == -0.1
          and abs(rho_meta) < crit and abs(rho_rules) < crit)
    verdict(capsys, 2, "Spearman on the published rank columns", ok,
            f"meta {rho_meta!r}, rules {rho_rules!r}, critical |rho| {crit} (n=5, alpha 0.10)")


def test_criterion_3_reference_rankings(capsys):
    tree = RuleTree.from_registry(load_registry("default"))
    rules = rank_rules(tree, KDDTEST_PROFILE, None, FIVE).ranks()
    meta = rank_meta(constant_model(PUBLISHED_PREDICTED), KDDTEST_PROFILE, FIVE).ranks()
    want_rules = {"kernel_svr": 1, "naive_bayes": 2, "random_forest": 3,
                  "decision_tree": 4, "kernel_svc": 5}
    want_meta = {"kernel_svr": 1, "naive_bayes": 2, "random_forest": 3,
                 "kernel_svc": 4, "decision_tree": 5}
    verdict(capsys, 3, "reference ranking fixtures", rules == want_rules and meta == want_meta,
            f"rules {rules}; meta {meta}")


def _nslkdd_dir():
    d = os.environ.get("METASELECT_NSLKDD_DIR")
    if not d:
        return None
    d = Path(d)
    if (d / "KDDTrain+.txt").is_file() and (d / "KDDTest+.txt").is_file():
        return d
    return None


def test_criterion_4_nslkdd_reproduction(capsys, tmp_path):
    data = _nslkdd_dir()
    if data is None:
        with capsys.disabled():
            print("\n[criterion 4] SKIP NSL-KDD reproduction: set METASELECT_NSLKDD_DIR "
                  "to a directory with KDDTrain+.txt and KDDTest+.txt")
        pytest.skip("NSL-KDD files not available")
    doc = {"version": 1, "seed": 0, "repetitions": 20, "split_ratio": 0.8,
           "workers": int(os.environ.get("METASELECT_WORKERS", "0")),
           "candidates": ALL_ALGORITHMS,
           "subset_source": {"id": "KDDTrain+", "path": str(data / "KDDTrain+.txt"),
                             "format": "nslkdd", "k": 9},
           "test_dataset": {"id": "KDDTest+", "path": str(data / "KDDTest+.txt"),
                            "format": "nslkdd"}}
    t0 = time.perf_counter()
    report = run_experiment(manifest_from_dict(doc, tmp_path))
    elapsed = time.perf_counter() - t0
    validate_report(report)
    means = {r.algorithm_id: r.observed_mean_recall for r in report.rows}
    sds = {r.algorithm_id: r.sd_observed_recall for r in report.rows}
    svc, svr = report.row("kernel_svc"), report.row("kernel_svr")
    checks = {
        "under 30 minutes": elapsed < 1800,
        "recalls within 0.05": all(abs(means[a] - PUBLISHED_RECALL[a]) <= 0.05
                                   for a in ALL_ALGORITHMS),
        "random forest top": max(means, key=means.get) == "random_forest",
        "naive Bayes lowest": min(means, key=means.get) == "naive_bayes",
        "SDs <= 0.02": max(sds.values()) <= 0.02,
        "SVM/SVR intervals": None not in (svc.ci_lower, svc.ci_upper, svr.ci_lower,
                                          svr.ci_upper),
    }
    overlap = ["kernel_svc", "kernel_svr"] in report.overlap_pairs
    detail = (f"{elapsed:.0f} s; means {({a: round(v, 4) for a, v in means.items()})}; "
              f"max SD {max(sds.values()):.4f}; SVM/SVR overlap={overlap}; "
              f"failed checks {[k for k, v in checks.items() if not v]}")
    verdict(capsys, 4, "NSL-KDD reproduction", all(checks.values()), detail)


PROPERTY_SUITES = [
    "test_preprocess.py::test_minmax_examples",
    "test_preprocess.py::test_minmax_range_and_clamp",
    "test_preprocess.py::test_onehot_examples",
    "test_preprocess.py::test_onehot_row_sums",
    "test_preprocess.py::test_pca_collinear",
    "test_preprocess.py::test_pca_against_covariance_eigendecomposition",
    "test_metafeatures.py::test_four_row_oracle",
    "test_dataset.py::test_split_class_count_bound",
    "test_dataset.py::test_subsets_partition_property",
    "test_recommend.py::test_rules_ranking_is_bijection",
    "test_recommend.py::test_meta_ranking_is_bijection",
    "test_evaluation.py::test_spearman_identities",
    "test_experiment.py::test_two_runs_identical_bodies",
]


def test_criterion_5_property_suites(capsys):
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
         *(str(TESTS / s) for s in PROPERTY_SUITES)],
        cwd=TESTS.parent, capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr
    ok = proc.returncode == 0 and elapsed < 120
    verdict(capsys, 5, "property suites", ok,
            f"{len(PROPERTY_SUITES)} suites, {summary}, {elapsed:.1f} s (limit 120 s)")


def test_criterion_6_separable_sanity(capsys, tmp_path):
    for i, n in enumerate((600, 800, 1000)):
        write_separable_csv(tmp_path / f"train{i}.csv", n, i + 1)
    write_separable_csv(tmp_path / "test.csv", 1000, 99)
    doc = {"version": 1, "seed": 3, "repetitions": 3, "candidates": ALL_ALGORITHMS,
           "training_datasets": [dataset_entry(f"train{i}", tmp_path / f"train{i}.csv")
                                 for i in range(3)],
           "test_dataset": dataset_entry("test", tmp_path / "test.csv")}
    (tmp_path / "manifest.json").write_text(json.dumps(doc))
    report = run_experiment(manifest_from_dict(doc, tmp_path))
    validate_report(report)
    recalls = {r.algorithm_id: r.observed_mean_recall for r in report.rows}
    eff = {k: s.recall_efficiency for k, s in report.strategies.items()}
    ok = (min(recalls.values()) >= 0.99 and set(eff) == {"rules", "meta"}
          and min(eff.values()) >= 0.99)
    verdict(capsys, 6, "separable synthetic manifest", ok,
            f"min test recall {min(recalls.values()):.4f}, efficiencies "
            f"{({k: round(v, 4) for k, v in eff.items()})}")
