"""Dense symmetric solves, pseudo-inverse fallback and O(r^2) row/column exchange.

The Gram matrices handled here are symmetric positive semidefinite.  When they
are nonsingular a Cholesky factorization is used; otherwise the minimum-norm
least-squares solution is taken from a thresholded eigendecomposition.

:func:`swap_row_col` replaces one row and column of a matrix whose inverse is
held explicitly.  The update is a bordered (Schur complement) delete of the old
row/column followed by a bordered insert of the new one, two symmetric rank-one
corrections costing O(r^2) each.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import blas, lapack

SIGMA_TOL = 1e-10
DELTA_TOL = 1e-12
REFACTOR_PERIOD = 64
DRIFT_BOUND = 1e-6
SYMMETRY_TOL = 1e-9


class SingularMatrixError(np.linalg.LinAlgError):
    """The matrix is singular to working tolerance; use :func:`pseudo_solve`."""


@dataclass(frozen=True)
class Tolerances:
    sigma_tol: float = SIGMA_TOL
    delta_tol: float = DELTA_TOL
    refactor_period: int = REFACTOR_PERIOD
    drift_bound: float = DRIFT_BOUND

    def __post_init__(self):
        if min(self.sigma_tol, self.delta_tol, self.drift_bound) <= 0 or self.refactor_period < 1:
            raise ValueError("tolerances must be positive")


DEFAULT_TOLERANCES = Tolerances()


def _as_square(C) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {C.shape}")
    return C


def _check_symmetric(C: np.ndarray) -> None:
    scale = np.abs(C).max(initial=0.0)
    if np.abs(C - C.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")


def _check_rhs(C: np.ndarray, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape[0] != C.shape[0]:
        raise ValueError(f"dimension mismatch: C is {C.shape}, b is {b.shape}")
    return b


def cholesky(C: np.ndarray, sigma_tol: float = SIGMA_TOL) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor and reciprocal 1-norm condition estimate.

    Raises :class:`SingularMatrixError` when the factorization breaks down or
    the condition estimate is below ``sigma_tol``.
    """
    C = _as_square(C)
    if C.shape[0] == 0:
        return C.copy(), 1.0
    factor, info = lapack.dpotrf(C, lower=1, clean=1)
    if info != 0:
        raise SingularMatrixError(f"Cholesky breakdown at pivot {info}")
    anorm = np.abs(C).sum(axis=0).max()
    rcond, info = lapack.dpocon(factor, anorm, uplo="L")
    if info != 0 or not rcond > sigma_tol:
        raise SingularMatrixError(f"matrix is singular to tolerance (rcond={rcond:.3g})")
    return factor, float(rcond)


def _cho_solve(factor: np.ndarray, b: np.ndarray) -> np.ndarray:
    x, info = lapack.dpotrs(factor, b.reshape(b.shape[0], -1), lower=1)
    if info != 0:
        raise np.linalg.LinAlgError(f"dpotrs failed with info={info}")
    return x.reshape(b.shape)


def pseudo_solve(C, b, sigma_tol: float = SIGMA_TOL) -> np.ndarray:
    """Minimum-norm least-squares solution ``pinv(C) @ b`` for symmetric PSD ``C``.

    Eigenvalues with ``|ev| <= sigma_tol * max|ev|`` are treated as zero.
    ``b`` may be a vector or a matrix of right-hand sides.
    """
    C = _as_square(C)
    b = _check_rhs(C, b)
    if C.shape[0] == 0:
        return b.copy()
    ev, V = np.linalg.eigh((C + C.T) / 2)
    top = np.abs(ev).max()
    if top == 0.0:
        return np.zeros_like(b)
    keep = np.abs(ev) > sigma_tol * top
    V = V[:, keep]
    return V @ ((V.T @ b) / (ev[keep] if b.ndim == 1 else ev[keep][:, None]))


def solve_spd(C, b, sigma_tol: float = SIGMA_TOL) -> np.ndarray:
    """Solve ``C lam = b`` for symmetric ``C``; singular ``C`` falls back to :func:`pseudo_solve`."""
    return solve_with_info(C, b, sigma_tol)[0]


def solve_with_info(C, b, sigma_tol: float = SIGMA_TOL) -> tuple[np.ndarray, bool, float]:
    """Like :func:`solve_spd` but also reports ``(lam, used_pseudo, rcond)``.

    ``rcond`` is 0.0 on the pseudo-inverse path.
    """
    C = _as_square(C)
    _check_symmetric(C)
    b = _check_rhs(C, b)
    try:
        factor, rcond = cholesky(C, sigma_tol)
    except SingularMatrixError:
        return pseudo_solve(C, b, sigma_tol), True, 0.0
    lam = _cho_solve(factor, b)
    # one step of iterative refinement; recovers exact answers on dyadic systems
    lam += _cho_solve(factor, b - C @ lam)
    return lam, False, rcond


@dataclass(frozen=True)
class MaintainedInverse:
    """Explicit inverse of a symmetric matrix, kept current across row/column swaps."""

    matrix: np.ndarray
    inv: np.ndarray
    rcond: float
    swaps_since_refactor: int = 0
    refactor_count: int = 0
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES)
    col_abs_sums: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.col_abs_sums is None:
            object.__setattr__(self, "col_abs_sums", np.abs(self.matrix).sum(axis=0))

    @property
    def r(self) -> int:
        return self.matrix.shape[0]

    def solve(self, b) -> np.ndarray:
        return self.inv @ np.asarray(b, dtype=float)

    def residual(self) -> float:
        """``max |C @ inv - I|``; O(r^3), meant for checks rather than the update path."""
        return float(np.abs(self.matrix @ self.inv - np.eye(self.r)).max(initial=0.0))

    def probe_residual(self) -> float:
        """Cheap O(r^2) drift estimate from one fixed probe vector."""
        if self.r == 0:
            return 0.0
        v = _probe(self.r)
        return float(np.abs(self.matrix @ (self.inv @ v) - v).max())


def _probe(r: int) -> np.ndarray:
    return np.random.default_rng(r).uniform(0.5, 1.5, size=r) * np.where(np.arange(r) % 2, 1.0, -1.0)


def invert(C, tolerances: Tolerances = DEFAULT_TOLERANCES) -> MaintainedInverse:
    """O(r^3) inverse; raises :class:`SingularMatrixError` if ``C`` is singular."""
    C = _as_square(C)
    _check_symmetric(C)
    factor, rcond = cholesky(C, tolerances.sigma_tol)
    inv = _cho_solve(factor, np.eye(C.shape[0]))
    inv = (inv + inv.T) / 2
    return MaintainedInverse(C.copy(), inv, rcond, tolerances=tolerances)


def _refactor(state: MaintainedInverse, matrix: np.ndarray) -> MaintainedInverse:
    fresh = invert(matrix, state.tolerances)
    return replace(fresh, refactor_count=state.refactor_count + 1)


def swap_row_col(state: MaintainedInverse, index: int, new_row, old_row=None) -> MaintainedInverse:
    """Inverse of the matrix with row and column ``index`` replaced by ``new_row``.

    ``new_row[index]`` is the new diagonal entry.  ``old_row`` defaults to the
    stored row; if given it must agree with it.  The last row is the
    normalization constraint and cannot be swapped.

    Raises :class:`SingularMatrixError` if the new matrix is singular.
    """
    r = state.r
    if not 0 <= index < r - 1:
        raise IndexError(f"swap index {index} out of range (0 <= index < {r - 1})")
    new_row = np.asarray(new_row, dtype=float)
    if new_row.shape != (r,):
        raise ValueError(f"new_row must have length {r}")
    if old_row is not None and not np.array_equal(np.asarray(old_row, dtype=float),
                                                  state.matrix[index]):
        raise ValueError("old_row does not match the maintained matrix")

    matrix = state.matrix.copy()
    matrix[index, :] = new_row
    matrix[:, index] = new_row
    tol = state.tolerances
    scale = np.abs(matrix).max()

    if state.swaps_since_refactor + 1 >= tol.refactor_period:
        return _refactor(state, matrix)

    P = state.inv
    p_ii = P[index, index]
    # Schur complement of the outgoing diagonal; tiny means the old inverse is unreliable here.
    if not p_ii > 0 or 1.0 / p_ii < tol.delta_tol * scale:
        return _refactor(state, matrix)
    # delete: afterwards row/column `index` of Q is zero and the rest inverts the remaining block
    u = P[:, index].copy()
    # P is symmetric, so copying whichever of P, P.T is Fortran-ordered is a plain memcpy
    Q = (P if P.flags.f_contiguous else P.T).copy(order="F")
    Q = blas.dger(-1.0 / p_ii, u, u, a=Q, overwrite_a=1)

    c = new_row.copy()
    c[index] = 0.0
    y = Q @ c
    y[index] = 0.0
    s = new_row[index] - c @ y
    if not s > tol.delta_tol * scale:
        return _refactor(state, matrix)

    # insert the new row/column by bordering
    Q = blas.dger(1.0 / s, y, y, a=Q, overwrite_a=1)
    Q[:, index] = -y / s
    Q[index, :] = -y / s
    Q[index, index] = 1.0 / s

    col_abs = state.col_abs_sums - np.abs(state.matrix[index]) + np.abs(new_row)
    col_abs[index] = np.abs(new_row).sum()
    rcond = 1.0 / (col_abs.max() * np.abs(Q).sum(axis=0).max())
    if not rcond > tol.sigma_tol:
        return _refactor(state, matrix)
    updated = MaintainedInverse(matrix, Q, float(rcond), state.swaps_since_refactor + 1,
                                state.refactor_count, tol, col_abs)
    if updated.probe_residual() > tol.drift_bound:
        return _refactor(state, matrix)
    return updated

