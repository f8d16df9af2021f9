import csv
import json

import numpy as np
import pytest

ALL_ALGORITHMS = ["decision_tree", "random_forest", "naive_bayes", "kernel_svc", "kernel_svr"]


def write_separable_csv(path, n, seed, margin=0.02, categorical=False):
    """Positive iff feature0 > 0.5; feature0 avoids (0.5 - margin, 0.5 + margin)."""
    rng = np.random.default_rng(seed)
    header = ["feature0", "feature1"] + (["proto"] if categorical else []) + ["label"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for _ in range(n):
            f0 = rng.uniform()
            while abs(f0 - 0.5) < margin:
                f0 = rng.uniform()
            row = [repr(f0), repr(rng.normal(0.0, 0.01))]
            if categorical:
                row.append(str(rng.choice(["tcp", "udp", "icmp"])))
            row.append("attack" if f0 > 0.5 else "normal")
            w.writerow(row)
    return path


def write_noisy_csv(path, n, seed, n_numeric=3):
    """Mixed-type table with an imperfect, noisy decision rule."""
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(n_numeric)] + ["proto", "label"])
        for _ in range(n):
            x = rng.normal(size=n_numeric)
            proto = str(rng.choice(["tcp", "udp", "icmp"]))
            score = x[0] + 0.5 * x[1] + (0.7 if proto == "tcp" else 0.0) + rng.normal(0, 0.7)
            w.writerow([repr(float(v)) for v in x] + [proto, "attack" if score > 0.2 else "normal"])
    return path


def dataset_entry(name, path):
    return {"id": name, "path": str(path.name), "target": "label", "positive_label": "attack"}


@pytest.fixture
def three_set_manifest(tmp_path):
    """Synthetic manifest: two training sets plus a subset source, mixed schemas."""
    write_noisy_csv(tmp_path / "a.csv", 160, 1)
    write_noisy_csv(tmp_path / "b.csv", 140, 2, n_numeric=2)
    write_noisy_csv(tmp_path / "src.csv", 200, 3)
    write_noisy_csv(tmp_path / "test.csv", 150, 4)
    doc = {
        "version": 1, "seed": 11, "repetitions": 2,
        "training_datasets": [dataset_entry("a", tmp_path / "a.csv"),
                              dataset_entry("b", tmp_path / "b.csv")],
        "subset_source": {**dataset_entry("src", tmp_path / "src.csv"), "k": 2},
        "test_dataset": dataset_entry("test", tmp_path / "test.csv"),
        "candidates": ALL_ALGORITHMS,
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


@pytest.fixture
def ids_characterization(tmp_path):
    doc = {"assigned_task": "classify",
           "data": ["labeled", "tabular", "mixed_types"],
           "resources": ["cpu"],
           "experience": ["intermediate"]}
    path = tmp_path / "ids.json"
    path.write_text(json.dumps(doc))
    return path
