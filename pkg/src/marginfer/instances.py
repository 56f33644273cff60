"""Random rule sets used by the oracle cross-checks and the test suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rulebase import ClassModel, Evidence, Rule, make_rule

CLASSES = ("x", "xbar")


@dataclass
class RandomInstance:
    n: int
    evidence: Evidence
    rules: list[Rule]
    class_model: ClassModel
    truth: dict[str, np.ndarray]


def random_distribution(l: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.random(l)
    return z / z.sum()


def random_mask(n: int, rng: np.random.Generator, max_size: int | None = None) -> list[int]:
    max_size = n if max_size is None else min(n, max_size)
    size = int(rng.integers(1, max_size + 1))
    return sorted(int(a) for a in rng.choice(n, size=size, replace=False))


def marginal_from_cells(attrs: list[int], n: int, z: np.ndarray) -> float:
    """Mass of ``z`` (evidence-relative cell order) on cells agreeing with the evidence on ``attrs``."""
    mask = 0
    for a in attrs:
        mask |= 1 << (n - 1 - a)
    cells = np.arange(z.shape[0])
    return float(z[(cells & mask) == mask].sum())


def rule_for(attrs: list[int], evidence: Evidence, rule_id: str, n: int,
             truth: dict[str, np.ndarray]) -> Rule:
    lhs = {a: evidence.values[a] for a in attrs}
    marginals = {c: min(1.0, marginal_from_cells(attrs, n, z)) for c, z in truth.items()}
    return make_rule(rule_id, lhs, marginals)


def random_instance(rng: np.random.Generator, n_max: int = 10, r_max: int = 8,
                    n_min: int = 1, duplicates: bool = False) -> RandomInstance:
    """Random firing rules with marginals taken from a hidden true distribution.

    ``r_max`` bounds the constraint count including the normalization row.
    With ``duplicates`` one rule is repeated verbatim, forcing a singular C.
    """
    n = int(rng.integers(n_min, n_max + 1))
    evidence = Evidence(tuple(bool(v) for v in rng.integers(0, 2, size=n)))
    truth = {c: random_distribution(1 << n, rng) for c in CLASSES}
    k = int(rng.integers(1 if duplicates else 0, r_max))
    rules = [rule_for(random_mask(n, rng), evidence, f"r{i}", n, truth) for i in range(k)]
    if duplicates and rules:
        src = rules[int(rng.integers(len(rules)))]
        rules.insert(int(rng.integers(len(rules) + 1)),
                     Rule(f"{src.id}_dup", src.lhs, src.marginals))
    priors = rng.random()
    cm = ClassModel(CLASSES, {"x": priors, "xbar": 1.0 - priors})
    return RandomInstance(n, evidence, rules, cm, truth)
