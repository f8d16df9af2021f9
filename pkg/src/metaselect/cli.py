"""Command-line entry point: ``metaselect <command> ...``."""
import argparse
import json
import logging
import sys
from pathlib import Path

from metaselect import __version__
from metaselect.dataset import load_csv, load_nslkdd
from metaselect.errors import MetaselectError
from metaselect.experiment import load_manifest, resolve_candidates, run_experiment
from metaselect.metafeatures import extract
from metaselect.recommend import (
    RuleTree, load_meta_model, predict_recall, rank_meta, rank_rules, save_meta_model)
from metaselect.report import emit_report, validate_report
from metaselect.taxonomy import (
    filter_techniques, load_characterization, load_registry, registry_to_dict)

logger = logging.getLogger("metaselect")


def _parse_overrides(pairs):
    out = {}
    for item in pairs or []:
        name, _, kind = item.partition("=")
        if not kind:
            raise MetaselectError(f"--kind expects NAME=KIND, got {item!r}")
        out[name] = kind
    return out


def cmd_characterize(args):
    registry = load_registry(args.registry)
    pc = load_characterization(args.characterization)
    techniques = filter_techniques(registry, pc)
    if args.json:
        print(json.dumps([t.to_dict() for t in techniques], indent=2))
    else:
        if not techniques:
            print("warning: no compatible techniques", file=sys.stderr)
        for t in techniques:
            print(f"{t.id}\t{t.display_name}")
    return 0


def cmd_metafeatures(args):
    if args.format == "nslkdd":
        table = load_nslkdd(args.dataset)
    else:
        if not args.target:
            raise MetaselectError("--target is required for CSV input")
        table = load_csv(args.dataset, args.target, args.positive_label,
                         _parse_overrides(args.kind))
    mf = extract(table)
    if args.json:
        print(mf.to_json())
    else:
        for name, value in mf.to_dict().items():
            print(f"{name}\t{value}")
    return 0


def cmd_experiment(args):
    manifest = load_manifest(args.manifest)
    report = run_experiment(manifest, keep_going=args.keep_going, workers=args.jobs)
    validate_report(report)
    out = Path(args.out)
    paths = emit_report(report, out)
    if report.meta_model is not None:
        save_meta_model(report.meta_model, out / "metamodel.json")
        paths.append(out / "metamodel.json")
    for p in paths:
        print(p)
    return 0


def cmd_recommend(args):
    manifest = load_manifest(args.manifest)
    registry = load_registry(manifest.registry)
    candidates = resolve_candidates(manifest, registry)
    test = manifest.test_dataset.load()
    mf = extract(test)
    model = load_meta_model(args.metamodel)
    result = {"dataset": test.name, "meta_features": mf.to_dict()}
    if registry.rule_tree is not None:
        rules = rank_rules(RuleTree.from_registry(registry), mf,
                           manifest.characterization, candidates)
        result["rules"] = rules.ranks()
    meta = rank_meta(model, mf, candidates)
    result["meta"] = meta.ranks()
    preds = predict_recall(model, mf, clamp=True)
    result["meta_predicted_recall"] = {a: preds[a] for a in candidates}
    print(json.dumps(result, indent=2))
    return 0


def cmd_taxonomy_validate(args):
    registry = load_registry(args.registry)
    if registry.rule_tree is not None:
        tree = RuleTree.from_registry(registry)
        ids = {t.id for t in registry.techniques}
        for leaf in tree.leaves():
            unknown = set(leaf) - ids
            if unknown:
                raise MetaselectError(f"rule tree ranks unknown techniques {sorted(unknown)}")
    if args.dump:
        print(json.dumps(registry_to_dict(registry), indent=2))
    print(f"ok: {len(registry.techniques)} techniques, "
          f"{len(registry.task_to_categories)} tasks, "
          f"{len(registry.category_to_approaches)} categories")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="metaselect",
        description="Algorithm selection for binary attack detection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("characterize", help="list techniques compatible with a characterization")
    p.add_argument("characterization", help="characterization JSON file")
    p.add_argument("--registry", default="default", help="registry JSON file or 'default'")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("metafeatures", help="print the 12 meta-features of a dataset")
    p.add_argument("dataset")
    p.add_argument("--format", choices=("csv", "nslkdd"), default="csv")
    p.add_argument("--target")
    p.add_argument("--positive-label")
    p.add_argument("--kind", action="append", metavar="NAME=KIND",
                   help="override an inferred column kind (numeric|categorical)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_metafeatures)

    p = sub.add_parser("experiment", help="run the full experiment in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default="results")
    p.add_argument("--keep-going", action="store_true",
                   help="record failed cells and continue")
    p.add_argument("-j", "--jobs", type=int, default=None,
                   help="worker processes for the base-learning grid (0: one per CPU)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("recommend", help="rank candidates for the manifest's test dataset")
    p.add_argument("manifest")
    p.add_argument("--metamodel", required=True, help="exported meta-model JSON")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("taxonomy", help="taxonomy registry tools")
    tsub = p.add_subparsers(dest="taxonomy_command", required=True)
    v = tsub.add_parser("validate", help="validate a registry file")
    v.add_argument("registry")
    v.add_argument("--dump", action="store_true", help="print the normalized registry")
    v.set_defaults(func=cmd_taxonomy_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (MetaselectError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"metaselect: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
