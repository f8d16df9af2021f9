"""End-to-end experiment: preprocessing, meta-features, base learning, meta-learning.

A manifest names the training datasets, an optional source table cut into
contiguous subsets, and the held-out test dataset.  Every
(dataset, repetition, algorithm) cell is independent and seeded from
``(global seed, dataset id, repetition, algorithm id)``.
"""
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from metaselect import kernels, learners
from metaselect.dataset import load_csv, load_nslkdd, make_subsets, stratified_split
from metaselect.errors import MetaselectError
from metaselect.evaluation import (
    ConfusionCounts, RecallSample, bonferroni_ci, overlapping_pairs, recall,
    recall_efficiency, spearman, spearman_critical_value, spearman_pvalue)
from metaselect.metafeatures import extract
from metaselect.preprocess import fit_pipeline, transform
from metaselect.recommend import (
    RuleTree, predict_recall, rank_meta, rank_rules, ranking_from_scores, train_meta)
from metaselect.report import AlgorithmRow, RankingReport, StrategySummary
from metaselect.taxonomy import (
    ProblemCharacterization, check_characterization, filter_techniques, load_registry)

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
LEAKAGE_MODES = ("strict", "paper")
FAMILY_CONFIDENCE = 0.90
SPEARMAN_ALPHA = 0.10
AGGREGATION = "simple mean over (training set x repetition) cells"


class ExperimentError(MetaselectError):
    """A grid cell failed; the message carries its provenance."""


@dataclass(frozen=True)
class DatasetRef:
    id: str
    path: Path
    format: str = "csv"
    target: str | None = None
    positive_label: str | None = None
    kind_overrides: dict = field(default_factory=dict)
    k: int | None = None  # subset count, subset source only

    @classmethod
    def from_dict(cls, doc, base):
        fmt = doc.get("format", "csv")
        if fmt not in ("csv", "nslkdd"):
            raise MetaselectError(f"dataset {doc.get('id')!r}: unknown format {fmt!r}")
        if fmt == "csv" and (doc.get("target") is None or doc.get("positive_label") is None):
            raise MetaselectError(f"dataset {doc.get('id')!r}: csv needs target and positive_label")
        path = Path(doc["path"])
        return cls(id=str(doc.get("id") or path.stem), path=path if path.is_absolute() else base / path,
                   format=fmt, target=doc.get("target"),
                   positive_label=None if doc.get("positive_label") is None
                   else str(doc["positive_label"]),
                   kind_overrides=dict(doc.get("kind_overrides", {})), k=doc.get("k"))

    def load(self):
        if not self.path.exists():
            raise MetaselectError(f"dataset {self.id!r}: file not found: {self.path}")
        if self.format == "nslkdd":
            return load_nslkdd(self.path, name=self.id)
        return load_csv(self.path, self.target, self.positive_label, self.kind_overrides,
                        name=self.id)


@dataclass(frozen=True)
class ExperimentManifest:
    training_datasets: tuple
    test_dataset: DatasetRef
    subset_source: DatasetRef | None = None
    repetitions: int = 20
    split_ratio: float = 0.8
    seed: int = 0
    leakage_mode: str = "strict"
    candidates: tuple | None = None
    registry: str = "default"
    characterization: ProblemCharacterization | None = None
    hyperparams: dict = field(default_factory=dict)
    workers: int = 1
    digest: str = ""
    seed_source: str = "manifest"

    def __post_init__(self):
        if self.repetitions < 1:
            raise MetaselectError("repetitions must be at least 1")
        if not 0.0 < self.split_ratio < 1.0:
            raise MetaselectError("split_ratio must lie in (0, 1)")
        if self.leakage_mode not in LEAKAGE_MODES:
            raise MetaselectError(f"leakage_mode must be one of {LEAKAGE_MODES}")
        if self.workers < 0:
            raise MetaselectError("workers must be >= 0 (0 means one per CPU)")
        if self.subset_source is not None and not (self.subset_source.k or 0) >= 1:
            raise MetaselectError("subset_source needs k >= 1")
        if not self.training_datasets and self.subset_source is None:
            raise MetaselectError("manifest has no training datasets")
        ids = [d.id for d in self.training_datasets]
        if len(set(ids)) != len(ids):
            raise MetaselectError("training dataset ids must be unique")
        if self.test_dataset.id in ids:
            raise MetaselectError("test dataset id repeats a training dataset id")


def manifest_from_dict(doc, base_dir="."):
    """Parse a manifest document; relative paths resolve against ``base_dir``.

    ``METASELECT_SEED`` in the environment overrides the manifest seed.
    """
    if doc.get("version") != MANIFEST_VERSION:
        raise MetaselectError(f"unsupported manifest version {doc.get('version')!r}")
    base = Path(base_dir)
    if "test_dataset" not in doc:
        raise MetaselectError("manifest lacks test_dataset")
    pc = doc.get("characterization")
    if isinstance(pc, str):
        pc = json.loads((base / pc).read_text(encoding="utf-8"))
    registry = doc.get("registry", "default")
    if registry != "default":
        registry = str(base / registry)
    seed, seed_source = int(doc.get("seed", 0)), "manifest"
    if os.environ.get("METASELECT_SEED"):
        seed, seed_source = int(os.environ["METASELECT_SEED"]), "METASELECT_SEED"
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return ExperimentManifest(
        training_datasets=tuple(DatasetRef.from_dict(d, base)
                                for d in doc.get("training_datasets", [])),
        test_dataset=DatasetRef.from_dict(doc["test_dataset"], base),
        subset_source=(DatasetRef.from_dict(doc["subset_source"], base)
                       if doc.get("subset_source") else None),
        repetitions=int(doc.get("repetitions", 20)),
        split_ratio=float(doc.get("split_ratio", 0.8)),
        seed=seed,
        leakage_mode=doc.get("leakage_mode", "strict"),
        candidates=tuple(doc["candidates"]) if doc.get("candidates") else None,
        registry=registry,
        characterization=ProblemCharacterization.from_dict(pc) if pc else None,
        hyperparams=dict(doc.get("hyperparams", {})),
        workers=int(doc.get("workers", 1)),
        digest=hashlib.sha256(canonical.encode()).hexdigest(),
        seed_source=seed_source,
    )


def load_manifest(path):
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    return manifest_from_dict(doc, path.parent)


def derive_seed(global_seed, *parts):
    """63-bit task seed from the global seed and a task identity."""
    key = "|".join(str(p) for p in (global_seed, *parts)).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


def _file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class CellResult:
    dataset: str
    algorithm: str
    repetition: int
    holdout_recall: float | None = None
    test_recall: float | None = None
    runtime: float | None = None
    error: str | None = None


def resolve_candidates(manifest, registry):
    pc = manifest.characterization
    if pc is not None:
        check_characterization(registry, pc)
    if manifest.candidates is not None:
        cands = list(manifest.candidates)
    elif pc is not None:
        cands = [t.id for t in filter_techniques(registry, pc)]
    else:
        raise MetaselectError("manifest needs candidates or a characterization")
    unknown = [c for c in cands if c not in learners.ALGORITHMS]
    if unknown:
        raise MetaselectError(f"no base learner implements {unknown}")
    if not cands:
        raise MetaselectError("no candidate algorithms to evaluate")
    return cands


def load_datasets(manifest):
    """Training tables (external sets, then subsets) and the test table."""
    tables = [ref.load() for ref in manifest.training_datasets]
    if manifest.subset_source is not None:
        src = manifest.subset_source.load()
        tables.extend(make_subsets(src, manifest.subset_source.k,
                                   derive_seed(manifest.seed, src.name, "subsets")))
    test = manifest.test_dataset.load()
    return tables, test


def _recall_of(y_true, y_pred):
    return recall(ConfusionCounts.from_labels(y_true, y_pred))


def _run_split(manifest, table, rep, candidates, test, eval_on_test, keep_going):
    """One repetition on one dataset: split, preprocess, train every candidate."""
    cells = []
    split = stratified_split(table, manifest.split_ratio,
                             derive_seed(manifest.seed, table.name, rep, "split"))
    fit_on = split.train if manifest.leakage_mode == "strict" else table
    pp = fit_pipeline(fit_on)
    X_tr = transform(pp, split.train)
    X_ho = transform(pp, split.test)
    X_te = transform(pp, test) if eval_on_test else None
    y_tr, y_ho = split.train.labels(), split.test.labels()
    y_te = test.labels() if eval_on_test else None
    for alg in candidates:
        cell = CellResult(table.name, alg, rep)
        spec = learners.LearnerSpec(alg, manifest.hyperparams.get(alg, {}),
                                    derive_seed(manifest.seed, table.name, rep, alg))
        try:
            if eval_on_test:
                cell.runtime, model, pred_te = learners.measure_runtime(spec, X_tr, y_tr, X_te)
                cell.test_recall = _recall_of(y_te, pred_te)
                cell.holdout_recall = _recall_of(y_ho, learners.predict(model, X_ho))
            else:
                cell.runtime, _, pred_ho = learners.measure_runtime(spec, X_tr, y_tr, X_ho)
                cell.holdout_recall = _recall_of(y_ho, pred_ho)
        except Exception as exc:
            where = f"dataset={table.name}, algorithm={alg}, repetition={rep}"
            if not keep_going:
                raise ExperimentError(f"[{where}] {exc}") from exc
            cell.error = f"{type(exc).__name__}: {exc}"
            logger.warning("cell failed [%s]: %s", where, exc)
        cells.append(cell)
    return cells


def _split_task(args):
    return _run_split(*args)


def _run_grid(tasks, workers):
    """Run split tasks, serially or on a process pool; results keep task order."""
    if workers == 1 or len(tasks) <= 1:
        return [_run_split(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers or None) as pool:
        return list(pool.map(_split_task, tasks))


def run_experiment(manifest, keep_going=False, workers=None):
    """Execute the whole pipeline and assemble a :class:`RankingReport`.

    ``workers`` overrides the manifest's process count (0 means one per
    CPU).  Every grid cell carries its own derived seed, so the report body
    does not depend on it.
    """
    workers = manifest.workers if workers is None else int(workers)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    registry = load_registry(manifest.registry)
    candidates = resolve_candidates(manifest, registry)
    tables, test = load_datasets(manifest)
    warnings = []

    compatible = [t for t in tables if t.schema() == test.schema()]
    eval_names = {t.name for t in compatible}
    observed_source = "compatible_training_sets"
    if not compatible:
        observed_source = "test_dataset_splits"
        warnings.append("no training dataset shares the test schema; observed recall "
                        "comes from stratified splits of the test dataset")

    meta = {t.name: extract(t) for t in tables}
    test_mf = extract(test)

    tasks = [(manifest, table, rep, candidates, test, table.name in eval_names, keep_going)
             for table in tables for rep in range(manifest.repetitions)]
    if not compatible:
        tasks += [(manifest, test, rep, candidates, test, False, keep_going)
                  for rep in range(manifest.repetitions)]
    logger.info("base learning: %d splits x %d algorithms", len(tasks), len(candidates))
    cells = [c for result in _run_grid(tasks, workers) for c in result]
    if not compatible:
        # held-out parts of the test dataset's own splits are its test recall
        for c in cells:
            if c.dataset == test.name:
                c.test_recall, c.holdout_recall = c.holdout_recall, None

    ok = [c for c in cells if c.error is None]
    failures = [{"dataset": c.dataset, "algorithm": c.algorithm,
                 "repetition": c.repetition, "error": c.error}
                for c in cells if c.error is not None]

    # meta-learning experience: mean held-out recall per (dataset, algorithm)
    experience, experience_doc = [], []
    for table in tables:
        means = {}
        for alg in candidates:
            vals = [c.holdout_recall for c in ok
                    if c.dataset == table.name and c.algorithm == alg
                    and c.holdout_recall is not None]
            if vals:
                means[alg] = float(np.mean(vals))
                experience.append((meta[table.name], alg, means[alg]))
        experience_doc.append({"dataset": table.name, "rows": table.row_count,
                               "meta_features": meta[table.name].to_dict(),
                               "mean_holdout_recall": means})

    samples = {}
    runtimes = {}
    for alg in candidates:
        vals = [c.test_recall for c in ok if c.algorithm == alg and c.test_recall is not None]
        if not vals:
            raise ExperimentError(f"[algorithm={alg}] no successful test evaluations")
        samples[alg] = RecallSample(alg, tuple(vals))
        runtimes[alg] = float(np.mean([c.runtime for c in ok if c.algorithm == alg
                                       and c.test_recall is not None]))
    observed = ranking_from_scores({a: s.mean for a, s in samples.items()}, "observed")
    best_observed = max(s.mean for s in samples.values())

    rankings = {}
    meta_pred_raw = {}
    if registry.rule_tree is not None:
        tree = RuleTree.from_registry(registry)
        rankings["rules"] = rank_rules(tree, test_mf, manifest.characterization, candidates)
    else:
        warnings.append("registry has no rule tree; rules-of-thumb ranking skipped")
    try:
        meta_model = train_meta(experience)
    except MetaselectError as exc:
        meta_model = None
        warnings.append(f"meta-learner not trained: {exc}")
    if meta_model is not None:
        meta_pred_raw = predict_recall(meta_model, test_mf)
        rankings["meta"] = rank_meta(meta_model, test_mf, candidates)

    strategies = {}
    observed_ranks = [observed.rank_of(a) for a in candidates]
    for name, ranking in rankings.items():
        top = ranking.top
        rho = pval = None
        significant = None
        if len(candidates) >= 2:
            rho = spearman([ranking.rank_of(a) for a in candidates], observed_ranks)
            pval = spearman_pvalue(rho, len(candidates))
            significant = abs(rho) >= spearman_critical_value(len(candidates), SPEARMAN_ALPHA)
        strategies[name] = StrategySummary(
            strategy=name, top=top,
            recall_efficiency=recall_efficiency(samples[top].mean, best_observed),
            spearman=rho, spearman_pvalue=pval, significant=significant)

    interval_samples = {a: s.recalls for a, s in samples.items() if s.n >= 2}
    intervals = {}
    if interval_samples:
        intervals = bonferroni_ci(interval_samples, FAMILY_CONFIDENCE)
    if len(interval_samples) < len(samples):
        warnings.append("confidence intervals need at least 2 observations per algorithm")

    rows = []
    for alg in candidates:
        iv = intervals.get(alg)
        raw = meta_pred_raw.get(alg)
        rows.append(AlgorithmRow(
            algorithm_id=alg, display_name=learners.DISPLAY_NAMES[alg],
            observed_mean_recall=samples[alg].mean, sd_observed_recall=samples[alg].sd,
            n_observations=samples[alg].n,
            meta_predicted_recall=None if raw is None else min(max(raw, 0.0), 1.0),
            meta_predicted_recall_raw=raw,
            observed_rank=observed.rank_of(alg),
            rules_rank=rankings["rules"].rank_of(alg) if "rules" in rankings else None,
            meta_rank=rankings["meta"].rank_of(alg) if "meta" in rankings else None,
            ci_lower=None if iv is None else iv.lower,
            ci_upper=None if iv is None else iv.upper,
            mean_runtime=runtimes[alg]))

    files = [manifest.test_dataset] + list(manifest.training_datasets)
    if manifest.subset_source is not None:
        files.append(manifest.subset_source)
    provenance = {
        "manifest_sha256": manifest.digest,
        "seed": manifest.seed,
        "seed_source": manifest.seed_source,
        "leakage_mode": manifest.leakage_mode,
        "repetitions": manifest.repetitions,
        "split_ratio": manifest.split_ratio,
        "aggregation": AGGREGATION,
        "observed_source": observed_source,
        "evaluated_on_test": sorted(eval_names) if compatible else [test.name],
        "test_dataset": test.name,
        "file_sha256": {ref.id: _file_digest(ref.path) for ref in files},
        "backend": kernels.BACKEND,
    }
    report = RankingReport(
        rows=rows, strategies=strategies,
        family_confidence=FAMILY_CONFIDENCE,
        interval_alpha=None if not intervals else next(iter(intervals.values())).alpha,
        overlap_pairs=[list(p) for p in overlapping_pairs(intervals)],
        test_meta_features=test_mf.to_dict(),
        experience=experience_doc,
        warnings=warnings, failures=failures, provenance=provenance,
        timing={"started_at": started,
                "finished_at": datetime.now(timezone.utc).isoformat(),
                "elapsed_s": time.perf_counter() - t0})
    report.meta_model = meta_model
    return report
