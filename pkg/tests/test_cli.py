import json

import pytest

from metaselect import __version__
from metaselect.cli import main
from metaselect.report import load_report

from conftest import write_noisy_csv


def test_characterize(ids_characterization, capsys):
    assert main(["characterize", str(ids_characterization), "--registry", "default"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [l.split("\t")[0] for l in lines] == [
        "decision_tree", "random_forest", "naive_bayes", "kernel_svc", "kernel_svr"]


def test_characterize_json(ids_characterization, capsys):
    main(["characterize", str(ids_characterization), "--json"])
    assert len(json.loads(capsys.readouterr().out)) == 5


def test_metafeatures(tmp_path, capsys):
    p = tmp_path / "tiny.csv"
    p.write_text("A,B,t\n0,x,p\n0.5,y,q\n1,x,p\n0.25,y,q\n")
    assert main(["metafeatures", str(p), "--target", "t"]) == 0
    out = dict(l.split("\t") for l in capsys.readouterr().out.strip().splitlines())
    assert len(out) == 12
    assert out["n_rows"] == "4" and out["n_discrete"] == "1"
    assert float(out["grad_avg"]) == pytest.approx(7 / 12)
    assert main(["metafeatures", str(p), "--target", "t", "--kind", "A=categorical",
                 "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["n_discrete"] == 2


def test_experiment_and_recommend(three_set_manifest, tmp_path, capsys):
    out = tmp_path / "results"
    assert main(["experiment", str(three_set_manifest), "--out", str(out)]) == 0
    for name in ("report.json", "report.txt", "report.csv", "metamodel.json"):
        assert (out / name).is_file()
    report = load_report(out / "report.json")
    capsys.readouterr()
    assert main(["recommend", str(three_set_manifest),
                 "--metamodel", str(out / "metamodel.json")]) == 0
    rec = json.loads(capsys.readouterr().out)
    meta_ranks = {r.algorithm_id: r.meta_rank for r in report.rows}
    assert rec["meta"] == meta_ranks
    assert rec["rules"] == {r.algorithm_id: r.rules_rank for r in report.rows}


def test_taxonomy_validate(tmp_path, capsys):
    from metaselect.taxonomy import default_registry_text
    p = tmp_path / "reg.json"
    p.write_text(default_registry_text())
    assert main(["taxonomy", "validate", str(p)]) == 0
    assert capsys.readouterr().out.startswith("ok: 6 techniques")
    doc = json.loads(default_registry_text())
    tree = json.dumps(doc["rule_tree"]).replace('"kernel_svc"', '"quantum_annealer"')
    doc["rule_tree"] = json.loads(tree)
    p.write_text(json.dumps(doc))
    assert main(["taxonomy", "validate", str(p)]) == 2
    assert "quantum_annealer" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["metafeatures", "/nonexistent.csv", "--target", "t"],
    ["characterize", "/nonexistent.json"],
    ["experiment", "/nonexistent/manifest.json"],
])
def test_errors_exit_nonzero(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err.startswith("metaselect: error:")


def test_bad_flags_exit_nonzero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["metafeatures"])
    assert exc.value.code != 0


def test_version(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    assert __version__ in capsys.readouterr().out


def test_metafeatures_needs_target(tmp_path, capsys):
    p = write_noisy_csv(tmp_path / "n.csv", 10, 0)
    assert main(["metafeatures", str(p)]) == 2
