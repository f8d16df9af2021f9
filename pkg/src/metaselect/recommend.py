"""Step-two ranking: a rules-of-thumb tree and a recall-predicting meta-learner."""
import json
import operator
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from metaselect.errors import MetaselectError, RegistryError
from metaselect.learners.svm import KernelSVR
from metaselect.metafeatures import MetaFeatureVector
from metaselect.preprocess import minmax_scale
from metaselect.taxonomy import FACTORS

META_FORMAT_VERSION = 1

_OPS = {">": operator.gt, ">=": operator.ge, "<": operator.lt, "<=": operator.le,
        "==": operator.eq, "!=": operator.ne}


@dataclass(frozen=True)
class RankEntry:
    algorithm_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class Ranking:
    strategy: str
    entries: tuple

    def __post_init__(self):
        ranks = sorted(e.rank for e in self.entries)
        if ranks != list(range(1, len(ranks) + 1)):
            raise MetaselectError("ranks must be a permutation of 1..n")

    @property
    def order(self):
        return [e.algorithm_id for e in sorted(self.entries, key=lambda e: e.rank)]

    @property
    def top(self):
        return self.order[0]

    def rank_of(self, algorithm_id):
        for e in self.entries:
            if e.algorithm_id == algorithm_id:
                return e.rank
        raise KeyError(algorithm_id)

    def ranks(self):
        return {e.algorithm_id: e.rank for e in self.entries}


def ranking_from_scores(scores, strategy):
    """Rank by descending score; equal scores fall back to algorithm id order."""
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return Ranking(strategy, tuple(RankEntry(a, float(s), i + 1)
                                   for i, (a, s) in enumerate(ordered)))


class RuleTree:
    """Binary decision tree of hand-written preference rules.

    Nodes are dictionaries.  Internal nodes hold ``if`` plus ``then`` /
    ``else`` branches; the test is either a meta-feature comparison
    ``{"feature": name, "op": ">", "value": x}`` or a tag test
    ``{"factor": "data", "has": tag}`` on the characterization.  Leaves hold
    ``{"rank": [most preferred, ...]}``.
    """

    def __init__(self, root):
        self.root = root
        self.validate()

    @classmethod
    def from_registry(cls, registry):
        if registry.rule_tree is None:
            raise RegistryError("registry has no rule_tree section")
        return cls(registry.rule_tree)

    def to_dict(self):
        return self.root

    def leaves(self):
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if "rank" in node:
                out.append(list(node["rank"]))
            else:
                stack.extend([node["else"], node["then"]])
        return out

    def validate(self):
        names = set(MetaFeatureVector.names())
        stack = [(self.root, 0)]
        while stack:
            node, depth = stack.pop()
            if depth > 64:
                raise RegistryError("rule tree deeper than 64 levels")
            if not isinstance(node, dict):
                raise RegistryError("rule tree node must be an object")
            if "rank" in node:
                order = node["rank"]
                if not order or len(set(order)) != len(order):
                    raise RegistryError("leaf order must be nonempty without repeats")
                continue
            if not {"if", "then", "else"} <= set(node):
                raise RegistryError("internal node needs if/then/else")
            test = node["if"]
            if "feature" in test:
                if test["feature"] not in names:
                    raise RegistryError(f"unknown meta-feature {test['feature']!r}")
                if test.get("op") not in _OPS:
                    raise RegistryError(f"unknown comparison {test.get('op')!r}")
                if not isinstance(test.get("value"), (int, float)):
                    raise RegistryError("comparison value must be numeric")
            elif "factor" in test:
                if test["factor"] not in FACTORS or "has" not in test:
                    raise RegistryError(f"bad tag test {test!r}")
            else:
                raise RegistryError(f"unrecognized test {test!r}")
            stack.extend([(node["then"], depth + 1), (node["else"], depth + 1)])
        leaves = self.leaves()
        if any(set(leaf) != set(leaves[0]) for leaf in leaves):
            raise RegistryError("leaf orders are not permutations of one candidate set")

    def _passes(self, test, mf, pc):
        if "feature" in test:
            return _OPS[test["op"]](getattr(mf, test["feature"]), test["value"])
        return pc is not None and test["has"] in pc.tags(test["factor"])

    def leaf(self, mf, pc=None):
        node = self.root
        while "rank" not in node:
            node = node["then"] if self._passes(node["if"], mf, pc) else node["else"]
        return list(node["rank"])


def rank_rules(tree, mf, pc, candidates):
    """Order candidates by the preference list of the leaf ``mf``/``pc`` reaches."""
    candidates = list(candidates)
    if not candidates:
        raise MetaselectError("no candidates to rank")
    order = tree.leaf(mf, pc)
    missing = [c for c in candidates if c not in order]
    if missing:
        raise MetaselectError(f"rule leaf order lacks candidates {missing}")
    kept = [a for a in order if a in set(candidates)]
    n = len(kept)
    return Ranking("rules", tuple(RankEntry(a, float(n - i), i + 1)
                                  for i, a in enumerate(kept)))


@dataclass
class MetaModel:
    """One RBF epsilon-SVR per algorithm mapping scaled meta-features to recall."""

    scale: tuple  # (min, max) per meta-feature over the training experience
    regressors: dict

    @property
    def algorithms(self):
        return sorted(self.regressors)

    def scaled(self, mf):
        x = mf.as_array()
        return np.array([minmax_scale([v], p)[0][0] for v, p in zip(x, self.scale)])


def train_meta(experience, C=1.0, epsilon=0.1, tol=1e-3):
    """Fit the meta-learner on ``(MetaFeatureVector, algorithm id, mean recall)`` triples."""
    grouped = defaultdict(list)
    for mf, alg, rec in experience:
        if not 0.0 <= rec <= 1.0:
            raise MetaselectError(f"recall {rec} for {alg} outside [0, 1]")
        grouped[alg].append((mf, rec))
    if not grouped:
        raise MetaselectError("empty meta-learning experience")
    for alg, pairs in grouped.items():
        if len(pairs) < 2:
            raise MetaselectError(f"{alg}: meta-learner needs at least 2 training pairs")
    all_x = np.array([mf.as_array() for mf, _, _ in experience])
    scale = tuple(minmax_scale(all_x[:, j])[1] for j in range(all_x.shape[1]))
    model = MetaModel(scale=scale, regressors={})
    for alg in sorted(grouped):
        X = np.array([model.scaled(mf) for mf, _ in grouped[alg]])
        z = np.array([r for _, r in grouped[alg]])
        model.regressors[alg] = KernelSVR(C=C, gamma="scale", epsilon=epsilon,
                                          tol=tol).fit(X, z)
    return model


def predict_recall(model, mf, clamp=False):
    """Raw regressor output per algorithm; ``clamp`` limits values to [0, 1] for display."""
    x = model.scaled(mf)[None, :]
    out = {alg: float(reg.predict_raw(x)[0]) for alg, reg in model.regressors.items()}
    if clamp:
        out = {a: min(max(v, 0.0), 1.0) for a, v in out.items()}
    return out


def rank_meta(model, mf, candidates=None):
    scores = predict_recall(model, mf)
    if candidates is not None:
        missing = [c for c in candidates if c not in scores]
        if missing:
            raise MetaselectError(f"meta-model has no regressor for {missing}")
        scores = {c: scores[c] for c in candidates}
    return ranking_from_scores(scores, "meta")


def meta_model_to_dict(model):
    return {
        "format": "metaselect.meta_model",
        "version": META_FORMAT_VERSION,
        "feature_names": MetaFeatureVector.names(),
        "scale": [list(p) for p in model.scale],
        "regressors": {a: r.get_state() for a, r in sorted(model.regressors.items())},
    }


def meta_model_from_dict(doc):
    if doc.get("format") != "metaselect.meta_model":
        raise MetaselectError("not a metaselect meta-model document")
    if doc.get("version") != META_FORMAT_VERSION:
        raise MetaselectError(f"unsupported meta-model version {doc.get('version')}")
    return MetaModel(scale=tuple(tuple(p) for p in doc["scale"]),
                     regressors={a: KernelSVR.from_state(s)
                                 for a, s in doc["regressors"].items()})


def save_meta_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta_model_to_dict(model), fh, indent=2)


def load_meta_model(path):
    with open(path, encoding="utf-8") as fh:
        return meta_model_from_dict(json.load(fh))
