"""Problem characterization and taxonomy filtering.

An assigned task maps to categories of analysis, categories map to
analytical approaches, and techniques whose approaches intersect that set
and whose factor requirements are met become the candidates.
"""
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from metaselect.errors import RegistryError

logger = logging.getLogger(__name__)

REGISTRY_VERSION = 1
FACTORS = ("data", "resources", "experience")


@dataclass(frozen=True)
class ProblemCharacterization:
    assigned_task: str
    data_considerations: frozenset = frozenset()
    resource_considerations: frozenset = frozenset()
    experience_considerations: frozenset = frozenset()

    def __post_init__(self):
        if not self.assigned_task:
            raise RegistryError("assigned_task must be nonempty")
        for attr in ("data_considerations", "resource_considerations",
                     "experience_considerations"):
            object.__setattr__(self, attr, frozenset(getattr(self, attr)))

    def tags(self, factor):
        return {"data": self.data_considerations,
                "resources": self.resource_considerations,
                "experience": self.experience_considerations}[factor]

    @classmethod
    def from_dict(cls, doc):
        return cls(assigned_task=doc.get("assigned_task", ""),
                   data_considerations=doc.get("data", ()),
                   resource_considerations=doc.get("resources", ()),
                   experience_considerations=doc.get("experience", ()))

    def to_dict(self):
        return {"assigned_task": self.assigned_task,
                "data": sorted(self.data_considerations),
                "resources": sorted(self.resource_considerations),
                "experience": sorted(self.experience_considerations)}


@dataclass(frozen=True)
class TechniqueDescriptor:
    id: str
    display_name: str
    approaches: frozenset
    categories: frozenset
    training_styles: frozenset = frozenset()
    required_data_tags: frozenset = frozenset()
    required_resource_tags: frozenset = frozenset()

    def __post_init__(self):
        for attr in ("approaches", "categories", "training_styles",
                     "required_data_tags", "required_resource_tags"):
            object.__setattr__(self, attr, frozenset(getattr(self, attr)))
        if not self.approaches or not self.categories:
            raise RegistryError(f"technique {self.id!r} needs approaches and categories")

    @classmethod
    def from_dict(cls, doc):
        return cls(id=doc["id"], display_name=doc.get("display_name", doc["id"]),
                   approaches=doc.get("approaches", ()),
                   categories=doc.get("categories", ()),
                   training_styles=doc.get("training_styles", ()),
                   required_data_tags=doc.get("requires", {}).get("data", ()),
                   required_resource_tags=doc.get("requires", {}).get("resources", ()))

    def to_dict(self):
        return {"id": self.id, "display_name": self.display_name,
                "approaches": sorted(self.approaches),
                "categories": sorted(self.categories),
                "training_styles": sorted(self.training_styles),
                "requires": {"data": sorted(self.required_data_tags),
                             "resources": sorted(self.required_resource_tags)}}


@dataclass(frozen=True)
class MappingRegistry:
    task_to_categories: dict
    category_to_approaches: dict
    techniques: tuple
    approaches: frozenset = frozenset()
    considerations: dict = field(default_factory=dict)
    rule_tree: dict | None = None

    def technique(self, technique_id):
        for t in self.techniques:
            if t.id == technique_id:
                return t
        raise KeyError(technique_id)


def _problems(registry):
    problems = []
    universe = registry.approaches
    for task, cats in registry.task_to_categories.items():
        if not cats:
            problems.append(f"task {task!r} maps to no categories")
        for c in cats:
            if c not in registry.category_to_approaches:
                problems.append(f"task {task!r} references unknown category {c!r}")
    for cat, apps in registry.category_to_approaches.items():
        for a in apps:
            if a not in universe:
                problems.append(f"category {cat!r} references unknown approach {a!r}")
    seen = set()
    for t in registry.techniques:
        if t.id in seen:
            problems.append(f"duplicate technique id {t.id!r}")
        seen.add(t.id)
        for a in t.approaches - universe:
            problems.append(f"technique {t.id!r} uses unknown approach {a!r}")
        for c in t.categories - set(registry.category_to_approaches):
            problems.append(f"technique {t.id!r} uses unknown category {c!r}")
        for factor, tags in (("data", t.required_data_tags),
                             ("resources", t.required_resource_tags)):
            known = set(registry.considerations.get(factor, ()))
            for tag in tags - known:
                problems.append(f"technique {t.id!r} requires unknown {factor} tag {tag!r}")
    return problems


def registry_from_dict(doc):
    """Build and validate a registry from its JSON document."""
    if doc.get("version") != REGISTRY_VERSION:
        raise RegistryError(f"unsupported registry version {doc.get('version')!r}")
    for section in ("tasks", "categories", "approaches", "techniques"):
        if section not in doc:
            raise RegistryError(f"registry lacks section {section!r}")
    try:
        techniques = tuple(TechniqueDescriptor.from_dict(t) for t in doc["techniques"])
    except KeyError as exc:
        raise RegistryError(f"technique entry lacks {exc}") from None
    registry = MappingRegistry(
        task_to_categories={k: frozenset(v) for k, v in doc["tasks"].items()},
        category_to_approaches={k: frozenset(v) for k, v in doc["categories"].items()},
        techniques=techniques,
        approaches=frozenset(doc["approaches"]),
        considerations={f: tuple(doc.get("considerations", {}).get(f, ()))
                        for f in FACTORS},
        rule_tree=doc.get("rule_tree"),
    )
    problems = _problems(registry)
    if problems:
        raise RegistryError("; ".join(problems))
    return registry


def registry_to_dict(registry):
    doc = {
        "version": REGISTRY_VERSION,
        "considerations": {f: list(v) for f, v in registry.considerations.items()},
        "tasks": {k: sorted(v) for k, v in registry.task_to_categories.items()},
        "categories": {k: sorted(v) for k, v in registry.category_to_approaches.items()},
        "approaches": sorted(registry.approaches),
        "techniques": [t.to_dict() for t in registry.techniques],
    }
    if registry.rule_tree is not None:
        doc["rule_tree"] = registry.rule_tree
    return doc


def default_registry_text():
    return resources.files("metaselect").joinpath("data/default_registry.json").read_text(
        encoding="utf-8")


def load_registry(source="default"):
    """Load a registry from a path, or the shipped one for ``"default"``."""
    if source in (None, "default"):
        text = default_registry_text()
    else:
        text = Path(source).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RegistryError(f"registry is not valid JSON: {exc}") from None
    return registry_from_dict(doc)


def load_characterization(path):
    return ProblemCharacterization.from_dict(
        json.loads(Path(path).read_text(encoding="utf-8")))


def check_characterization(registry, pc):
    """Raise if the characterization uses tags outside the consideration registry."""
    for factor in FACTORS:
        known = set(registry.considerations.get(factor, ()))
        unknown = pc.tags(factor) - known
        if unknown:
            raise RegistryError(f"unknown {factor} considerations {sorted(unknown)}")


def map_task_to_categories(registry, task):
    try:
        return set(registry.task_to_categories[task])
    except KeyError:
        raise RegistryError(f"unknown assigned task {task!r}") from None


def map_categories_to_approaches(registry, categories):
    categories = set(categories)
    if not categories:
        raise RegistryError("no categories of analysis given")
    approaches = set()
    for c in sorted(categories):
        if c not in registry.category_to_approaches:
            raise RegistryError(f"unknown category of analysis {c!r}")
        approaches |= registry.category_to_approaches[c]
    return approaches


def filter_techniques(registry, characterization):
    """Techniques compatible with the characterization, in registry order.

    A technique qualifies when one of its approaches is reachable from the
    assigned task and its required data and resource tags are all present.
    An empty result is logged as a warning.
    """
    check_characterization(registry, characterization)
    categories = map_task_to_categories(registry, characterization.assigned_task)
    approaches = map_categories_to_approaches(registry, categories)
    out = [t for t in registry.techniques
           if t.approaches & approaches
           and t.required_data_tags <= characterization.data_considerations
           and t.required_resource_tags <= characterization.resource_considerations]
    if not out:
        logger.warning("no technique in the registry matches task %r with the given "
                       "considerations", characterization.assigned_task)
    return out
