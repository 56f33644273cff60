"""Likelihoods, posteriors and incremental rule exchange.

For the constraints firing on evidence ``e`` the minimum-norm estimate of
``p(e | class)`` is ``w @ inv(C) @ b[class]``; since every class shares the same
``C`` a single inverse serves all of them.  Posteriors follow from Bayes' rule,
``p(class | e)`` proportional to ``p(e | class) p(class)``.

The closed form ignores the requirement that every cell of the underlying
distribution be nonnegative.  :func:`verify_nonnegativity` checks it
explicitly for small ``n`` and :func:`clamp_resolve` applies the repair of
pinning the most negative cell to zero and solving again.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import oracle
from .constraint import (ConstraintError, ConstraintSystem, build_system,
                         gram_entries, overlap_row)
from .linalg import (DEFAULT_TOLERANCES, MaintainedInverse, SingularMatrixError, Tolerances,
                     invert, solve_with_info, swap_row_col)
from .rulebase import ClassModel, Evidence, Rule, RuleIndex, firing_rules

NEGATIVITY_TOL = 1e-12


class InferenceError(ValueError):
    pass


class UndefinedPosteriorError(InferenceError):
    """Every class has zero posterior weight; ``likelihoods`` holds the raw values."""

    def __init__(self, message: str, likelihoods: Mapping[str, float] | None = None):
        super().__init__(message)
        self.likelihoods = dict(likelihoods or {})


class Nonnegativity(str, enum.Enum):
    VERIFIED = "verified"
    VIOLATED = "violated"
    UNCHECKED = "unchecked"


@dataclass
class Diagnostics:
    condition_estimate: float = 1.0
    pseudo_inverse: bool = False
    nonnegativity: Nonnegativity = Nonnegativity.UNCHECKED
    clamp_iterations: dict[str, int] = field(default_factory=dict)
    consistency_residual: dict[str, float] = field(default_factory=dict)
    out_of_range: list[str] = field(default_factory=list)
    floored: list[str] = field(default_factory=list)
    fallback_rebuild: bool = False
    refactorizations: int = 0

    def to_dict(self) -> dict:
        return {
            "condition_estimate": _finite_or_none(self.condition_estimate),
            "pseudo_inverse": self.pseudo_inverse,
            "nonnegativity": self.nonnegativity.value,
            "clamp_iterations": dict(self.clamp_iterations),
            "consistency_residual": dict(self.consistency_residual),
            "out_of_range": list(self.out_of_range),
            "floored": list(self.floored),
            "fallback_rebuild": self.fallback_rebuild,
            "refactorizations": self.refactorizations,
        }


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


@dataclass
class InferenceResult:
    likelihoods: dict[str, float]
    posterior: dict[str, float]
    diagnostics: Diagnostics

    @property
    def argmax(self) -> str:
        return max(self.posterior, key=self.posterior.__getitem__)

    def to_dict(self) -> dict:
        return {
            "likelihoods": dict(self.likelihoods),
            "posterior": dict(self.posterior),
            "argmax": self.argmax,
            "diagnostics": self.diagnostics.to_dict(),
        }


# ---------------------------------------------------------------------------
# closed-form likelihood
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemSolution:
    lam: dict[str, np.ndarray]
    likelihoods: dict[str, float]
    residuals: dict[str, float]
    pseudo_inverse: bool
    rcond: float


def solve_system(system: ConstraintSystem, sigma_tol: float = DEFAULT_TOLERANCES.sigma_tol
                 ) -> SystemSolution:
    """Solve ``C lam = b`` for every class at once (one factorization)."""
    classes = list(system.b)
    B = np.column_stack([system.b[c] for c in classes]) if classes else np.zeros((system.r, 0))
    lam, pseudo, rcond = solve_with_info(system.C, B, sigma_tol)
    resid = np.linalg.norm(system.C @ lam - B, axis=0)
    likes = system.w @ lam
    return SystemSolution(
        lam={c: lam[:, k] for k, c in enumerate(classes)},
        likelihoods={c: system.unscale(float(likes[k])) for k, c in enumerate(classes)},
        residuals={c: float(resid[k]) for k, c in enumerate(classes)},
        pseudo_inverse=pseudo,
        rcond=rcond,
    )


def likelihood(system: ConstraintSystem, cls: str,
               sigma_tol: float = DEFAULT_TOLERANCES.sigma_tol) -> float:
    """Minimum-norm estimate of ``p(e | cls)``; not clipped to [0, 1]."""
    if cls not in system.b:
        raise InferenceError(f"system has no right-hand side for class {cls!r}")
    lam, _, _ = solve_with_info(system.C, system.b[cls], sigma_tol)
    return system.unscale(float(system.w @ lam))


def posterior_odds(p_x: float, like_x: float, like_notx: float) -> float:
    """``p(x | e)`` from the prior of ``x`` and the likelihoods of ``x`` and not-``x``."""
    if not 0.0 < p_x < 1.0:
        raise InferenceError(f"prior must lie in (0, 1), got {p_x!r}")
    if like_x < 0 or like_notx < 0:
        raise InferenceError("negative likelihood; resolve negativity first")
    num = like_x * p_x
    den = num + like_notx * (1.0 - p_x)
    if den == 0.0:
        raise UndefinedPosteriorError("posterior undefined: both likelihoods are zero",
                                      {"x": like_x, "notx": like_notx})
    return num / den


def normalize_posterior(likelihoods: Mapping[str, float], priors: Mapping[str, float]
                        ) -> dict[str, float]:
    weights = {c: likelihoods[c] * priors[c] for c in likelihoods}
    if any(v < 0 for v in weights.values()):
        raise InferenceError("negative likelihood; floor or clamp before normalizing")
    total = math.fsum(weights.values())
    if total == 0.0:
        raise UndefinedPosteriorError("posterior undefined: every class has zero weight",
                                      likelihoods)
    return {c: v / total for c, v in weights.items()}


# ---------------------------------------------------------------------------
# nonnegativity check and clamp repair
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    cell: int
    value: float
    description: str


@dataclass(frozen=True)
class NonnegativityReport:
    status: Nonnegativity
    min_value: float | None = None
    violations: tuple[Violation, ...] = ()
    z: np.ndarray | None = None


def describe_cell(cell: int, n: int, evidence: Evidence | None = None,
                  names: Sequence[str] | None = None) -> str:
    """Readable conjunction for a cell index, e.g. ``~F1 & F2``."""
    names = names or [f"F{k + 1}" for k in range(n)]
    parts = []
    for k in range(n):
        agrees = bool((cell >> (n - 1 - k)) & 1)
        value = agrees if evidence is None else (evidence.values[k] == agrees)
        parts.append(names[k] if value else f"~{names[k]}")
    return " & ".join(parts)


def explicit_solution(system: ConstraintSystem, firing: Sequence[Rule], cls: str,
                      sigma_tol: float = DEFAULT_TOLERANCES.sigma_tol) -> np.ndarray:
    """``A.T @ lam`` materialized over all ``2 ** n`` cells."""
    A = oracle.materialize_A(firing, system.n)
    lam, _, _ = solve_with_info(system.C, system.b[cls], sigma_tol)
    return A.T @ np.ldexp(lam, -system.scale_exponent)


def verify_nonnegativity(system: ConstraintSystem, firing: Sequence[Rule], cls: str,
                         n_limit: int = oracle.N_LIMIT, evidence: Evidence | None = None,
                         names: Sequence[str] | None = None,
                         sigma_tol: float = DEFAULT_TOLERANCES.sigma_tol) -> NonnegativityReport:
    if system.n > min(n_limit, oracle.N_LIMIT):
        return NonnegativityReport(Nonnegativity.UNCHECKED)
    z = explicit_solution(system, firing, cls, sigma_tol)
    bad = np.flatnonzero(z < -NEGATIVITY_TOL)
    violations = tuple(
        Violation(int(k), float(z[k]), describe_cell(int(k), system.n, evidence, names))
        for k in bad[np.argsort(z[bad])])
    status = Nonnegativity.VIOLATED if violations else Nonnegativity.VERIFIED
    return NonnegativityReport(status, float(z.min()), violations, z)


@dataclass(frozen=True)
class ClampOutcome:
    likelihood: float
    iterations: int
    converged: bool
    residual: float
    z: np.ndarray
    clamped_cells: tuple[int, ...]


def clamp_resolve(system: ConstraintSystem, firing: Sequence[Rule], cls: str,
                  n_limit: int = oracle.N_LIMIT, max_iter: int | None = None,
                  sigma_tol: float = DEFAULT_TOLERANCES.sigma_tol) -> ClampOutcome:
    """Pin negative cells to zero one at a time (most negative first) and re-solve.

    Each pinned cell adds an equality constraint ``z_k = 0`` to the Gram system;
    its inner products with the rule constraints are read off the explicit
    constraint matrix, so this needs ``n <= n_limit``.
    """
    n = system.n
    if n > min(n_limit, oracle.N_LIMIT):
        raise InferenceError(f"clamping needs the explicit representation (n <= {n_limit})")
    A = oracle.materialize_A(firing, n)
    last = A.shape[1] - 1
    factor = math.ldexp(1.0, -system.scale_exponent)
    C, b, w = system.C, system.b[cls], system.w
    lam, _, _ = solve_with_info(C, b, sigma_tol)
    z = A.T @ (lam * factor)
    cells: list[int] = []
    max_iter = A.shape[1] if max_iter is None else max_iter
    while z.min() < -NEGATIVITY_TOL and len(cells) < max_iter:
        cells.append(int(np.argmin(z)))
        K = np.asarray(cells)
        k = len(cells)
        cross = A[:, K] * factor
        C = np.block([[system.C, cross], [cross.T, np.eye(k) * factor]])
        b = np.concatenate([system.b[cls], np.zeros(k)])
        w = np.concatenate([system.w, (K == last).astype(float)])
        lam, _, _ = solve_with_info(C, b, sigma_tol)
        z = A.T @ (lam[:-k] * factor)
        z[K] += lam[-k:] * factor
    residual = float(np.linalg.norm(C @ lam - b))
    return ClampOutcome(
        likelihood=system.unscale(float(w @ lam)),
        iterations=len(cells),
        converged=bool(z.min() >= -NEGATIVITY_TOL),
        residual=residual,
        z=z,
        clamped_cells=tuple(cells),
    )


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def classify(rules: Sequence[Rule], evidence: Evidence, class_model: ClassModel, *,
             n: int | None = None, check_nonnegativity: bool = False, clamp: bool = False,
             n_limit: int = oracle.N_LIMIT, normalized: bool = False,
             tolerances: Tolerances = DEFAULT_TOLERANCES,
             attribute_names: Sequence[str] | None = None,
             index: RuleIndex | None = None) -> InferenceResult:
    """Likelihood and posterior of every class given total evidence.

    Negative likelihoods are floored at zero before normalization and listed
    in ``diagnostics.floored``.  With ``clamp`` set, classes whose explicit
    solution has negative cells use the clamped likelihood instead.  ``index``
    may be a prebuilt :class:`RuleIndex` over ``rules`` for faster firing.
    """
    if not class_model.classes:
        raise InferenceError("no classes")
    n = evidence.n if n is None else n
    hits = index.firing(evidence) if index is not None else firing_rules(rules, evidence)
    firing = [rules[i] for i in hits]
    system = build_system(firing, n, class_model.classes, normalized=normalized)
    sol = solve_system(system, tolerances.sigma_tol)
    diag = Diagnostics(
        condition_estimate=1.0 / sol.rcond if sol.rcond > 0 else math.inf,
        pseudo_inverse=sol.pseudo_inverse,
        consistency_residual=dict(sol.residuals),
    )
    likes = dict(sol.likelihoods)

    if check_nonnegativity or clamp:
        statuses = []
        for cls in class_model.classes:
            report = verify_nonnegativity(system, firing, cls, n_limit, evidence,
                                          attribute_names, tolerances.sigma_tol)
            statuses.append(report.status)
            if clamp and report.status is Nonnegativity.VIOLATED:
                outcome = clamp_resolve(system, firing, cls, n_limit,
                                        sigma_tol=tolerances.sigma_tol)
                likes[cls] = outcome.likelihood
                diag.clamp_iterations[cls] = outcome.iterations
                diag.consistency_residual[cls] = outcome.residual
        if Nonnegativity.UNCHECKED in statuses:
            diag.nonnegativity = Nonnegativity.UNCHECKED
        elif Nonnegativity.VIOLATED in statuses:
            diag.nonnegativity = Nonnegativity.VIOLATED
        else:
            diag.nonnegativity = Nonnegativity.VERIFIED

    return _finish(likes, class_model, diag)


def _finish(likes: dict[str, float], class_model: ClassModel, diag: Diagnostics
            ) -> InferenceResult:
    diag.out_of_range = [c for c, v in likes.items() if not 0.0 <= v <= 1.0]
    diag.floored = [c for c, v in likes.items() if v < 0.0]
    floored = {c: max(v, 0.0) for c, v in likes.items()}
    try:
        posterior = normalize_posterior(floored, class_model.priors)
    except UndefinedPosteriorError as exc:
        raise UndefinedPosteriorError(str(exc), likes) from None
    return InferenceResult(likes, posterior, diag)


# ---------------------------------------------------------------------------
# incremental engine
# ---------------------------------------------------------------------------

class Engine:
    """Mutable inference state for one evidence: firing rules, C, b and inv(C).

    :meth:`swap_rule` replaces one firing rule with another that also fires,
    updating the maintained inverse in O(r^2).
    """

    def __init__(self, rules: Sequence[Rule], evidence: Evidence, class_model: ClassModel, *,
                 n: int | None = None, normalized: bool = False,
                 tolerances: Tolerances = DEFAULT_TOLERANCES):
        self.evidence = evidence
        self.class_model = class_model
        self.n = evidence.n if n is None else n
        self.normalized = normalized
        self.tolerances = tolerances
        self.firing = [rules[i] for i in firing_rules(rules, evidence)]
        self.fallback_rebuild = False
        self._rebuild()

    # state -------------------------------------------------------------

    def _rebuild(self) -> None:
        self.system = build_system(self.firing, self.n, self.class_model.classes,
                                   self.normalized)
        self.C = self.system.C.copy()
        self.b = {c: v.copy() for c, v in self.system.b.items()}
        self.sizes = np.array([len(rule.lhs) for rule in self.firing] + [0], dtype=np.int64)
        self._invert_or_none()

    def _invert_or_none(self) -> None:
        try:
            self.inverse: MaintainedInverse | None = invert(self.C, self.tolerances)
        except SingularMatrixError:
            self.inverse = None

    @property
    def r(self) -> int:
        return self.C.shape[0]

    def current_system(self) -> ConstraintSystem:
        return ConstraintSystem(self.n, self.C.copy(), {c: v.copy() for c, v in self.b.items()},
                                np.ones(self.r), self.system.scale_exponent)

    # queries -----------------------------------------------------------

    def likelihoods(self) -> dict[str, float]:
        unscale = self.system.unscale
        if self.inverse is not None:
            g = self.inverse.inv @ np.ones(self.r)
            return {c: unscale(float(g @ b)) for c, b in self.b.items()}
        return dict(solve_system(self.current_system(), self.tolerances.sigma_tol).likelihoods)

    def result(self) -> InferenceResult:
        diag = Diagnostics(fallback_rebuild=self.fallback_rebuild)
        if self.inverse is not None:
            diag.condition_estimate = 1.0 / self.inverse.rcond
            diag.refactorizations = self.inverse.refactor_count
            likes = self.likelihoods()
            for c, b in self.b.items():
                diag.consistency_residual[c] = float(
                    np.linalg.norm(self.C @ self.inverse.solve(b) - b))
        else:
            sol = solve_system(self.current_system(), self.tolerances.sigma_tol)
            diag.condition_estimate = math.inf
            diag.pseudo_inverse = True
            diag.consistency_residual = dict(sol.residuals)
            likes = dict(sol.likelihoods)
        return _finish(likes, self.class_model, diag)

    def rebuild_likelihoods(self) -> dict[str, float]:
        """Likelihoods from a from-scratch build of the current firing set."""
        system = build_system(self.firing, self.n, self.class_model.classes, self.normalized)
        return solve_system(system, self.tolerances.sigma_tol).likelihoods

    # updates -----------------------------------------------------------

    def swap_rule(self, index: int, new_rule: Rule) -> InferenceResult:
        """Replace firing rule ``index`` by ``new_rule`` and return fresh results."""
        if not 0 <= index < len(self.firing):
            raise IndexError(f"firing-rule index {index} out of range "
                             f"(normalization row is not swappable)")
        if any(lit.attribute >= self.n for lit in new_rule.lhs) or not new_rule.fires(self.evidence):
            raise InferenceError(f"rule {new_rule.id!r} does not fire on the current evidence")
        missing = set(self.class_model.classes) - set(new_rule.marginals)
        if missing:
            raise ConstraintError(f"rule {new_rule.id!r} lacks marginals for {sorted(missing)}")

        m_row = overlap_row(self.firing, new_rule)
        size = len(new_rule.lhs)
        m_row[index] = size
        sizes = self.sizes.copy()
        sizes[index] = size
        row = gram_entries(m_row, size, sizes, self.n, self.system.scale_exponent)

        self.firing[index] = new_rule
        self.sizes = sizes
        self.C[index, :] = row
        self.C[:, index] = row
        for c in self.b:
            self.b[c][index] = new_rule.marginals[c]

        self.fallback_rebuild = False
        if self.inverse is not None:
            try:
                self.inverse = swap_row_col(self.inverse, index, row)
            except SingularMatrixError:
                self.inverse = None
                self.fallback_rebuild = True
        else:
            self._invert_or_none()
            self.fallback_rebuild = self.inverse is None
        return self.result()
