"""Ranking report structure, validation and JSON / text-table / CSV output.

The JSON document splits into a ``body`` that is a pure function of the
manifest, the data files and the seed, and a ``timing`` section holding
wall-clock measurements and timestamps.
"""
import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from metaselect.errors import MetaselectError

REPORT_VERSION = 1

TABLE_COLUMNS = (
    "Observed Mean Recall",
    "Meta-Learner Predicted Recall",
    "Mean Runtime (s)",
    "SD of Observed Recall",
    "Observed Ranks",
    "Rules-of-Thumb Predicted Ranks",
    "Meta-Learner Predicted Ranks",
)


@dataclass
class AlgorithmRow:
    algorithm_id: str
    display_name: str
    observed_mean_recall: float
    sd_observed_recall: float
    n_observations: int
    meta_predicted_recall: float | None
    meta_predicted_recall_raw: float | None
    observed_rank: int
    rules_rank: int | None
    meta_rank: int | None
    ci_lower: float | None
    ci_upper: float | None
    mean_runtime: float | None = None


@dataclass
class StrategySummary:
    strategy: str
    top: str
    recall_efficiency: float
    spearman: float | None
    spearman_pvalue: float | None
    significant: bool | None


@dataclass
class RankingReport:
    rows: list
    strategies: dict
    family_confidence: float
    interval_alpha: float | None
    overlap_pairs: list
    test_meta_features: dict
    experience: list
    warnings: list
    failures: list
    provenance: dict
    timing: dict = field(default_factory=dict)

    def __post_init__(self):
        self.meta_model = None

    def __eq__(self, other):
        return isinstance(other, RankingReport) and to_dict(self) == to_dict(other)

    def row(self, algorithm_id):
        for r in self.rows:
            if r.algorithm_id == algorithm_id:
                return r
        raise KeyError(algorithm_id)


def to_dict(report):
    rows = []
    runtimes = {}
    for r in report.rows:
        d = asdict(r)
        runtimes[r.algorithm_id] = d.pop("mean_runtime")
        rows.append(d)
    body = {
        "rows": rows,
        "strategies": {k: asdict(v) for k, v in sorted(report.strategies.items())},
        "intervals": {"family_confidence": report.family_confidence,
                      "per_interval_alpha": report.interval_alpha,
                      "overlap_pairs": report.overlap_pairs},
        "test_meta_features": report.test_meta_features,
        "experience": report.experience,
        "warnings": report.warnings,
        "failures": report.failures,
        "provenance": report.provenance,
    }
    return {"format": "metaselect.report", "version": REPORT_VERSION, "body": body,
            "timing": {**report.timing, "mean_runtime_s": runtimes}}


def from_dict(doc):
    if doc.get("format") != "metaselect.report":
        raise MetaselectError("not a metaselect report document")
    if doc.get("version") != REPORT_VERSION:
        raise MetaselectError(f"unsupported report version {doc.get('version')}")
    body = doc["body"]
    timing = dict(doc.get("timing", {}))
    runtimes = timing.pop("mean_runtime_s", {})
    rows = [AlgorithmRow(**r, mean_runtime=runtimes.get(r["algorithm_id"]))
            for r in body["rows"]]
    return RankingReport(
        rows=rows,
        strategies={k: StrategySummary(**v) for k, v in body["strategies"].items()},
        family_confidence=body["intervals"]["family_confidence"],
        interval_alpha=body["intervals"]["per_interval_alpha"],
        overlap_pairs=body["intervals"]["overlap_pairs"],
        test_meta_features=body["test_meta_features"],
        experience=body["experience"], warnings=body["warnings"],
        failures=body["failures"], provenance=body["provenance"], timing=timing)


def body_json(report):
    """Canonical serialization of the deterministic part of a report."""
    return json.dumps(to_dict(report)["body"], sort_keys=True, indent=2)


def validate_report(report):
    """Check rank columns are permutations and efficiencies recompute exactly."""
    n = len(report.rows)
    expect = list(range(1, n + 1))
    for col in ("observed_rank", "rules_rank", "meta_rank"):
        vals = [getattr(r, col) for r in report.rows]
        if all(v is None for v in vals):
            continue
        if sorted(vals) != expect:
            raise MetaselectError(f"{col} is not a permutation of 1..{n}")
    best = max(r.observed_mean_recall for r in report.rows)
    for name, s in report.strategies.items():
        top = report.row(s.top)
        if top.observed_mean_recall / best != s.recall_efficiency:
            raise MetaselectError(f"{name}: recall efficiency does not recompute")
        if not 0.0 < s.recall_efficiency <= 1.0:
            raise MetaselectError(f"{name}: recall efficiency outside (0, 1]")
    return True


def _fmt(value, spec):
    return "-" if value is None else format(value, spec)


def text_table(report):
    header = ("Algorithm",) + TABLE_COLUMNS
    lines = []
    for r in report.rows:
        lines.append((r.display_name,
                      _fmt(r.observed_mean_recall, ".9f"),
                      _fmt(r.meta_predicted_recall, ".9f"),
                      _fmt(r.mean_runtime, ".6f"),
                      _fmt(r.sd_observed_recall, ".6f"),
                      _fmt(r.observed_rank, "d"),
                      _fmt(r.rules_rank, "d"),
                      _fmt(r.meta_rank, "d")))
    widths = [max(len(h), *(len(l[i]) for l in lines)) for i, h in enumerate(header)]
    out = io.StringIO()
    out.write("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip() + "\n")
    out.write("  ".join("-" * w for w in widths) + "\n")
    for l in lines:
        out.write("  ".join(c.ljust(w) for c, w in zip(l, widths)).rstrip() + "\n")
    out.write("\n")
    for name, s in sorted(report.strategies.items()):
        rho = "-" if s.spearman is None else f"{s.spearman:.3f}"
        sig = ("-" if s.significant is None
               else ("significant" if s.significant else "not significant"))
        out.write(f"{name}: top={s.top} recall_efficiency={s.recall_efficiency:.6f} "
                  f"spearman={rho} ({sig})\n")
    conf = int(round(report.family_confidence * 100))
    for r in report.rows:
        if r.ci_lower is not None:
            out.write(f"{conf}% Bonferroni interval {r.display_name}: "
                      f"[{r.ci_lower:.6f}, {r.ci_upper:.6f}]\n")
    if report.overlap_pairs:
        pairs = ", ".join(f"{a}~{b}" for a, b in report.overlap_pairs)
        out.write(f"overlapping intervals: {pairs}\n")
    for w in report.warnings:
        out.write(f"warning: {w}\n")
    return out.getvalue()


CSV_FIELDS = ("algorithm_id", "display_name", "observed_mean_recall",
              "meta_predicted_recall", "mean_runtime", "sd_observed_recall",
              "observed_rank", "rules_rank", "meta_rank", "n_observations",
              "ci_lower", "ci_upper")


def csv_text(report):
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in report.rows:
        d = asdict(r)
        writer.writerow({k: "" if d[k] is None else d[k] for k in CSV_FIELDS})
    return out.getvalue()


def emit_report(report, out_dir, formats=("json", "text", "csv")):
    """Write report.json / report.txt / report.csv; returns the written paths."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for fmt in formats:
            if fmt == "json":
                path = out_dir / "report.json"
                path.write_text(json.dumps(to_dict(report), indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
            elif fmt == "text":
                path = out_dir / "report.txt"
                path.write_text(text_table(report), encoding="utf-8")
            elif fmt == "csv":
                path = out_dir / "report.csv"
                path.write_text(csv_text(report), encoding="utf-8")
            else:
                raise MetaselectError(f"unknown report format {fmt!r}")
            written.append(path)
    except OSError as exc:
        raise MetaselectError(f"cannot write report to {out_dir}: {exc}") from exc
    return written


def load_report(path):
    return from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
