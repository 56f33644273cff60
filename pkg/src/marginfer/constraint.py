"""Gram matrix of the firing constraints, assembled from overlap counts.

For firing conjunctive rules ``i`` and ``j`` the inner product of their
(exponentially long) indicator vectors over the joint assignments is
``2 ** (n - m_ii - m_jj + m_ij)``, where ``m_ij`` counts the attributes the two
left-hand sides share.  The normalization constraint (all ones, right-hand side
1) is always appended as the last row and has no attributes.

Nothing in this module allocates a vector of length ``2 ** n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .rulebase import Rule

MAX_EXPONENT = 1000


class ConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class OverlapCounts:
    """Shared-attribute counts between firing rules plus the normalization row.

    ``m[i, j]`` is the number of attributes common to the lhs of rules i and j;
    the last row and column (normalization) are zero.
    """

    m: np.ndarray

    @property
    def r(self) -> int:
        return self.m.shape[0]


@dataclass(frozen=True)
class ConstraintSystem:
    """C, b (per class) and w for one evidence.

    When ``scale_exponent`` is nonzero, ``C`` holds the Gram matrix divided by
    ``2 ** scale_exponent``; the solution of ``C lam = b`` is then scaled up by
    the same factor, which :meth:`unscale` undoes.
    """

    n: int
    C: np.ndarray
    b: Mapping[str, np.ndarray]
    w: np.ndarray
    scale_exponent: int = 0

    @property
    def r(self) -> int:
        return self.C.shape[0]

    def unscale(self, value: float) -> float:
        return math.ldexp(value, -self.scale_exponent) if self.scale_exponent else value


def _lhs_matrices(firing: Sequence[Rule], n: int) -> tuple[np.ndarray, np.ndarray]:
    pos = np.zeros((len(firing), n), dtype=np.int64)
    neg = np.zeros((len(firing), n), dtype=np.int64)
    for i, rule in enumerate(firing):
        for lit in rule.lhs:
            if lit.attribute >= n:
                raise ConstraintError(
                    f"rule {rule.id!r} references attribute {lit.attribute} >= n={n}")
            (pos if lit.polarity else neg)[i, lit.attribute] = 1
    return pos, neg


def overlap_counts(firing: Sequence[Rule], n: int | None = None) -> OverlapCounts:
    """Overlap counts for a set of rules that fire on one common evidence.

    Raises :class:`ConstraintError` if two rules assign different values to a
    shared attribute, since they cannot both fire.
    """
    if n is None:
        n = 1 + max((lit.attribute for rule in firing for lit in rule.lhs), default=-1)
    pos, neg = _lhs_matrices(firing, n)
    conflict = pos @ neg.T
    if np.any(conflict):
        i, j = np.argwhere(conflict)[0]
        raise ConstraintError(
            f"rules {firing[i].id!r} and {firing[j].id!r} disagree on a shared "
            "attribute and cannot fire together")
    member = pos + neg
    r = len(firing) + 1
    m = np.zeros((r, r), dtype=np.int64)
    m[:-1, :-1] = member @ member.T
    m.setflags(write=False)
    return OverlapCounts(m)


def overlap_row(firing: Sequence[Rule], rule: Rule) -> np.ndarray:
    """Overlap counts of ``rule`` against each of ``firing`` and the normalization row."""
    attrs = rule.attributes
    values = {lit.attribute: lit.polarity for lit in rule.lhs}
    row = np.zeros(len(firing) + 1, dtype=np.int64)
    for k, other in enumerate(firing):
        for lit in other.lhs:
            if lit.attribute in attrs:
                if values[lit.attribute] != lit.polarity:
                    raise ConstraintError(
                        f"rules {rule.id!r} and {other.id!r} disagree on a shared attribute")
                row[k] += 1
    return row


def gram_entries(m_ij: np.ndarray, m_ii: np.ndarray, m_jj: np.ndarray, n: int,
                 scale_exponent: int = 0) -> np.ndarray:
    exponent = n - scale_exponent - m_ii - m_jj + m_ij
    if exponent.size and exponent.max() > MAX_EXPONENT:
        raise ConstraintError(
            f"Gram entries up to 2**{int(exponent.max())} overflow float64; "
            "use the normalized scale")
    return np.ldexp(1.0, exponent.astype(np.int64))


def build_C(counts: OverlapCounts, n: int, scale_exponent: int = 0) -> np.ndarray:
    """Gram matrix ``C[i, j] = 2 ** (n - m_ii - m_jj + m_ij)``, optionally divided by ``2 ** scale_exponent``."""
    m = counts.m
    if n < int(m.diagonal().max(initial=0)):
        raise ConstraintError(f"n={n} is smaller than a rule's lhs size")
    d = m.diagonal()
    return gram_entries(m, d[:, None], d[None, :], n, scale_exponent)


def build_b(firing: Sequence[Rule], cls: str) -> np.ndarray:
    b = np.ones(len(firing) + 1)
    for i, rule in enumerate(firing):
        try:
            b[i] = rule.marginals[cls]
        except KeyError:
            raise ConstraintError(f"rule {rule.id!r} has no marginal for class {cls!r}") from None
    return b


def build_w(r: int) -> np.ndarray:
    """Image of the full-evidence selector under A.

    Every firing rule's indicator covers the full-evidence cell, as does the
    normalization row, so this is all ones.
    """
    return np.ones(r)


def build_system(firing: Sequence[Rule], n: int, classes: Sequence[str],
                 normalized: bool = False) -> ConstraintSystem:
    counts = overlap_counts(firing, n)
    scale_exponent = n if normalized else 0
    C = build_C(counts, n, scale_exponent)
    b = {cls: build_b(firing, cls) for cls in classes}
    return ConstraintSystem(n=n, C=C, b=b, w=build_w(counts.r), scale_exponent=scale_exponent)
