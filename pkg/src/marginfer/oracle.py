"""Exponential-size ground truth for small attribute counts.

Cells of the joint distribution are indexed relative to the evidence: bit
``n - 1 - k`` of the index (so the most significant bit belongs to the first
attribute) is 1 iff attribute ``k`` takes its evidence value.  The last index,
all ones, is therefore the full-evidence cell whose value is ``p(e | class)``.

Everything here materializes vectors of length ``2 ** n`` and is only meant
for verification and for the clamp repair at small ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rulebase import Rule

N_LIMIT = 20


class OracleLimitError(ValueError):
    pass


@dataclass(frozen=True)
class ExplicitDistribution:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        l = values.shape[0]
        if values.ndim != 1 or l < 1 or l & (l - 1):
            raise ValueError("length must be a power of two")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0].bit_length() - 1

    def __len__(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _check_n(n: int) -> None:
    if not 0 <= n <= N_LIMIT:
        raise OracleLimitError(f"explicit materialization limited to n <= {N_LIMIT}, got n={n}")


def rule_mask(rule: Rule, n: int) -> int:
    """Bit mask (in cell-index bit order) of the attributes in ``rule``'s lhs."""
    mask = 0
    for lit in rule.lhs:
        mask |= 1 << (n - 1 - lit.attribute)
    return mask


def materialize_A(firing: Sequence[Rule], n: int) -> np.ndarray:
    """The r x 2**n 0/1 constraint matrix, normalization row last."""
    _check_n(n)
    cells = np.arange(1 << n)
    A = np.empty((len(firing) + 1, 1 << n))
    for i, rule in enumerate(firing):
        mask = rule_mask(rule, n)
        A[i] = (cells & mask) == mask
    A[-1] = 1.0
    return A


def min_norm_solution(A, b) -> ExplicitDistribution:
    """Minimum-norm least-squares solution of ``A z = b`` (SVD based)."""
    z, *_ = np.linalg.lstsq(np.asarray(A, float), np.asarray(b, float), rcond=None)
    return ExplicitDistribution(z)


def _check_distribution(z: np.ndarray) -> None:
    if np.any(z < 0):
        raise ValueError("distribution has negative entries")
    if abs(z.sum() - 1.0) > 1e-9:
        raise ValueError(f"distribution sums to {z.sum()!r}, not 1")


def _plogp(z: np.ndarray) -> float:
    nz = z[z > 0]
    return float(np.dot(nz, np.log(nz)))


def information_measure(z) -> float:
    """Discrimination information from the equiprobable distribution, ``n ln 2 + sum z ln z``."""
    z = np.asarray(z, dtype=float)
    _check_distribution(z)
    return math.log(z.shape[0]) + _plogp(z)


def entropy(z) -> float:
    """Shannon entropy in nats, with ``0 ln 0 = 0``."""
    z = np.asarray(z, dtype=float)
    _check_distribution(z)
    return -_plogp(z)


def exact_inference(A, b) -> float:
    """``p(e | class)``: the full-evidence entry of the minimum-norm solution."""
    return float(min_norm_solution(A, b).values[-1])


@dataclass(frozen=True)
class ClampResult:
    z: ExplicitDistribution
    unclamped: ExplicitDistribution
    clamped_cells: tuple[int, ...]
    converged: bool
    residual: float

    @property
    def likelihood(self) -> float:
        return float(self.z.values[-1])

    @property
    def iterations(self) -> int:
        return len(self.clamped_cells)


def clamp_resolve_explicit(A, b, tol: float = 1e-12, max_iter: int | None = None) -> ClampResult:
    """Repair negative cells by fixing them at zero and re-solving without them.

    Each pass removes the column of the most negative remaining cell and solves
    the minimum-norm problem over the surviving cells.
    """
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    l = A.shape[1]
    max_iter = l if max_iter is None else max_iter
    unclamped = min_norm_solution(A, b).values
    z = unclamped.copy()
    free = np.ones(l, dtype=bool)
    clamped: list[int] = []
    while z.min() < -tol and len(clamped) < max_iter:
        k = int(np.argmin(z))
        clamped.append(k)
        free[k] = False
        z = np.zeros(l)
        if free.any():
            z[free], *_ = np.linalg.lstsq(A[:, free], b, rcond=None)
    residual = float(np.linalg.norm(A @ z - b))
    return ClampResult(ExplicitDistribution(z), ExplicitDistribution(unclamped),
                       tuple(clamped), bool(z.min() >= -tol), residual)
