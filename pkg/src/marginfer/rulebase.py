"""Attributes, conjunctive rules, evidence and class priors.

A rule base is read from a JSON document of the form::

    {"attributes": ["F1", "F2", "F3"],
     "classes": ["x", "xbar"],
     "priors": {"x": 0.5, "xbar": 0.5},
     "rules": [{"id": "r1", "lhs": {"F1": true},
                "marginals": {"x": 0.5, "xbar": 0.3}}]}

Each rule stores ``p(lhs | class)`` for every class.  Evidence is a JSON object
assigning a boolean to every attribute.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

PRIOR_TOLERANCE = 1e-12


class RuleBaseError(ValueError):
    """Raised for malformed or invalid rule and evidence files.

    ``line`` and ``column`` are set for JSON syntax errors; ``path`` names the
    offending element for semantic errors (e.g. ``rules[2].lhs.F9``).
    """

    def __init__(self, message: str, *, line: int | None = None,
                 column: int | None = None, path: str | None = None):
        self.line = line
        self.column = column
        self.path = path
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if path is not None:
            where.append(path)
        super().__init__(f"{message} ({'; '.join(where)})" if where else message)


@dataclass(frozen=True)
class AttributeSpace:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 1:
            raise RuleBaseError("attribute space needs at least one attribute")
        if len(set(self.names)) != len(self.names):
            raise RuleBaseError("attribute names must be unique")
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(self.names)})

    @property
    def n(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise RuleBaseError(f"unknown attribute {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._index


@dataclass(frozen=True, order=True)
class Literal:
    attribute: int
    polarity: bool


@dataclass(frozen=True)
class Rule:
    """Conjunctive rule ``lhs => class`` with ``p(lhs | class)`` per class."""

    id: str
    lhs: tuple[Literal, ...]
    marginals: Mapping[str, float] = field(hash=False)

    def __post_init__(self):
        if not self.lhs:
            raise RuleBaseError(f"rule {self.id!r} has an empty left-hand side")
        lhs = tuple(sorted(self.lhs))
        attrs = [lit.attribute for lit in lhs]
        if len(set(attrs)) != len(attrs):
            raise RuleBaseError(f"rule {self.id!r} repeats an attribute in its lhs")
        if any(a < 0 for a in attrs):
            raise RuleBaseError(f"rule {self.id!r} has a negative attribute index")
        for cls, p in self.marginals.items():
            if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
                raise RuleBaseError(
                    f"rule {self.id!r}: marginal for class {cls!r} is {p!r}, not in [0, 1]")
        object.__setattr__(self, "lhs", lhs)
        object.__setattr__(self, "marginals", dict(self.marginals))

    @property
    def attributes(self) -> frozenset[int]:
        return frozenset(lit.attribute for lit in self.lhs)

    def fires(self, evidence: "Evidence") -> bool:
        values = evidence.values
        return all(values[lit.attribute] == lit.polarity for lit in self.lhs)

    def check_space(self, space: AttributeSpace) -> None:
        for lit in self.lhs:
            if lit.attribute >= space.n:
                raise RuleBaseError(
                    f"rule {self.id!r} references attribute index {lit.attribute} "
                    f"but the space has only {space.n} attributes")


@dataclass(frozen=True)
class Evidence:
    values: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(bool(v) for v in self.values))

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ClassModel:
    classes: tuple[str, ...]
    priors: Mapping[str, float] = field(hash=False)

    def __post_init__(self):
        if len(self.classes) < 2:
            raise RuleBaseError("at least two classes are required")
        if len(set(self.classes)) != len(self.classes):
            raise RuleBaseError("class values must be unique")
        if set(self.priors) != set(self.classes):
            raise RuleBaseError("priors must be given for exactly the declared classes")
        if any(p < 0 for p in self.priors.values()):
            raise RuleBaseError("priors must be nonnegative")
        total = math.fsum(self.priors.values())
        if abs(total - 1.0) > PRIOR_TOLERANCE:
            raise RuleBaseError(f"priors sum to {total!r}, not 1")
        object.__setattr__(self, "priors", dict(self.priors))


@dataclass(frozen=True)
class RuleBase:
    space: AttributeSpace
    rules: tuple[Rule, ...]
    class_model: ClassModel

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        ids = [rule.id for rule in self.rules]
        if len(set(ids)) != len(ids):
            raise RuleBaseError("rule ids must be unique")
        for rule in self.rules:
            rule.check_space(self.space)
            missing = set(self.class_model.classes) - set(rule.marginals)
            if missing:
                raise RuleBaseError(
                    f"rule {rule.id!r} lacks marginals for classes {sorted(missing)}")

    def __iter__(self):
        return iter((self.space, list(self.rules), self.class_model))


def firing_rules(rules: Sequence[Rule], evidence: Evidence) -> list[int]:
    """Indices of the rules whose whole lhs is satisfied by ``evidence``, in input order."""
    return [i for i, rule in enumerate(rules) if rule.fires(evidence)]


# ---------------------------------------------------------------------------
# JSON reading and writing
# ---------------------------------------------------------------------------

def _load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise RuleBaseError(f"syntax error: {exc.msg}", line=exc.lineno,
                            column=exc.colno) from None


def _expect(cond: bool, message: str, path: str) -> None:
    if not cond:
        raise RuleBaseError(message, path=path)


def _is_prob(p: Any) -> bool:
    return isinstance(p, (int, float)) and not isinstance(p, bool) and 0.0 <= p <= 1.0


def rulebase_from_dict(doc: Mapping[str, Any]) -> RuleBase:
    _expect(isinstance(doc, dict), "rule file must be a JSON object", "$")
    for key in ("attributes", "classes", "priors", "rules"):
        _expect(key in doc, f"missing key {key!r}", "$")

    names = doc["attributes"]
    _expect(isinstance(names, list) and all(isinstance(s, str) for s in names),
            "attributes must be a list of strings", "attributes")
    try:
        space = AttributeSpace(tuple(names))
    except RuleBaseError as exc:
        raise RuleBaseError(str(exc), path="attributes") from None

    classes = doc["classes"]
    _expect(isinstance(classes, list) and all(isinstance(s, str) for s in classes),
            "classes must be a list of strings", "classes")
    priors = doc["priors"]
    _expect(isinstance(priors, dict), "priors must be an object", "priors")
    for cls, p in priors.items():
        _expect(isinstance(p, (int, float)) and not isinstance(p, bool),
                "prior must be a number", f"priors.{cls}")
    try:
        class_model = ClassModel(tuple(classes), {k: float(v) for k, v in priors.items()})
    except RuleBaseError as exc:
        raise RuleBaseError(str(exc), path="priors") from None

    raw_rules = doc["rules"]
    _expect(isinstance(raw_rules, list), "rules must be a list", "rules")
    rules = []
    for k, raw in enumerate(raw_rules):
        path = f"rules[{k}]"
        _expect(isinstance(raw, dict), "rule must be an object", path)
        for key in ("id", "lhs", "marginals"):
            _expect(key in raw, f"missing key {key!r}", path)
        rid = raw["id"]
        _expect(isinstance(rid, str), "rule id must be a string", f"{path}.id")
        lhs = raw["lhs"]
        # duplicate keys inside one lhs object are caught by the object_pairs hook
        _expect(isinstance(lhs, dict) and lhs, "lhs must be a nonempty object", f"{path}.lhs")
        literals = []
        for name, value in lhs.items():
            _expect(name in space, f"unknown attribute {name!r}", f"{path}.lhs.{name}")
            _expect(isinstance(value, bool), "lhs values must be true or false",
                    f"{path}.lhs.{name}")
            literals.append(Literal(space.index(name), value))
        marginals = raw["marginals"]
        _expect(isinstance(marginals, dict), "marginals must be an object", f"{path}.marginals")
        for cls, p in marginals.items():
            _expect(cls in class_model.classes, f"unknown class {cls!r}",
                    f"{path}.marginals.{cls}")
            _expect(_is_prob(p), f"marginal {p!r} outside [0, 1]", f"{path}.marginals.{cls}")
        try:
            rules.append(Rule(rid, tuple(literals), {c: float(p) for c, p in marginals.items()}))
        except RuleBaseError as exc:
            raise RuleBaseError(str(exc), path=path) from None
    return RuleBase(space, tuple(rules), class_model)


def _reject_duplicate_keys(pairs):
    keys = [k for k, _ in pairs]
    dupes = {k for k in keys if keys.count(k) > 1}
    if dupes:
        raise RuleBaseError(f"duplicate keys {sorted(dupes)} in one object")
    return dict(pairs)


def parse_rulebase(text: str) -> RuleBase:
    """Parse and validate rule-file content.

    The result unpacks as ``space, rules, class_model``.
    """
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise RuleBaseError(f"syntax error: {exc.msg}", line=exc.lineno,
                            column=exc.colno) from None
    return rulebase_from_dict(doc)


def rule_to_dict(rule: Rule, space: AttributeSpace) -> dict[str, Any]:
    return {
        "id": rule.id,
        "lhs": {space.names[lit.attribute]: lit.polarity for lit in rule.lhs},
        "marginals": dict(rule.marginals),
    }


def rule_from_dict(raw: Mapping[str, Any], space: AttributeSpace,
                   class_model: ClassModel) -> Rule:
    """Read a single rule object, validating it against an existing rule base."""
    doc = {
        "attributes": list(space.names),
        "classes": list(class_model.classes),
        "priors": dict(class_model.priors),
        "rules": [raw],
    }
    return rulebase_from_dict(doc).rules[0]


def rulebase_to_dict(rulebase: RuleBase) -> dict[str, Any]:
    return {
        "attributes": list(rulebase.space.names),
        "classes": list(rulebase.class_model.classes),
        "priors": dict(rulebase.class_model.priors),
        "rules": [rule_to_dict(rule, rulebase.space) for rule in rulebase.rules],
    }


def serialize_rulebase(rulebase: RuleBase) -> str:
    return json.dumps(rulebase_to_dict(rulebase), indent=2)


def parse_evidence(text: str, space: AttributeSpace) -> Evidence:
    """Parse an evidence file; every attribute of ``space`` must be assigned."""
    doc = _load_json(text)
    _expect(isinstance(doc, dict), "evidence must be a JSON object", "$")
    return evidence_from_mapping(doc, space)


def evidence_from_mapping(assignment: Mapping[str, Any], space: AttributeSpace) -> Evidence:
    for name, value in assignment.items():
        _expect(name in space, f"unknown attribute {name!r}", name)
        _expect(isinstance(value, bool), "evidence values must be true or false", name)
    missing = [name for name in space.names if name not in assignment]
    _expect(not missing, f"evidence must assign every attribute; missing {missing}", "$")
    return Evidence(tuple(assignment[name] for name in space.names))


def evidence_to_dict(evidence: Evidence, space: AttributeSpace) -> dict[str, bool]:
    return dict(zip(space.names, evidence.values))


def make_rule(rule_id: str, lhs: Mapping[int, bool] | Iterable[tuple[int, bool]],
              marginals: Mapping[str, float]) -> Rule:
    """Convenience constructor taking ``{attribute_index: polarity}``."""
    items = lhs.items() if isinstance(lhs, Mapping) else lhs
    return Rule(rule_id, tuple(Literal(a, bool(v)) for a, v in items), marginals)


class RuleIndex:
    """Firing lookup grouped by lhs attribute set.

    Equivalent to :func:`firing_rules` but costs one dictionary probe per
    distinct attribute set rather than one test per rule.
    """

    def __init__(self, rules: Sequence[Rule]):
        self.rules = tuple(rules)
        groups: dict[tuple[int, ...], dict[tuple[bool, ...], list[int]]] = {}
        for i, rule in enumerate(self.rules):
            attrs = tuple(lit.attribute for lit in rule.lhs)
            values = tuple(lit.polarity for lit in rule.lhs)
            groups.setdefault(attrs, {}).setdefault(values, []).append(i)
        self._groups = groups

    def firing(self, evidence: Evidence) -> list[int]:
        values = evidence.values
        hits: list[int] = []
        for attrs, table in self._groups.items():
            hits.extend(table.get(tuple(values[a] for a in attrs), ()))
        hits.sort()
        return hits
