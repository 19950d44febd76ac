"""Numerical kernels shared by every reduction step.

Truncated SVD with a deterministic sign convention, modified Gram-Schmidt
basis extension, ILU-preconditioned restarted GMRES and the smallest singular
value of a (sparse) system matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spsla

from .errors import InvalidInputError, NumericFailureError, PivotBreakdownError

DEFAULT_DEFLATION_TOL = 1e-10
DEFAULT_DROP_TOL = 1e-3
DEFAULT_RESTART = 50
# Above this size smallest_singular_value switches from a dense SVD to
# inverse iteration on M^T M through a sparse LU factorization.
DENSE_SVD_LIMIT = 1000


@dataclass(frozen=True)
class SvdResult:
    """Truncated SVD M ≈ U diag(s) W^T with orthonormal U and W."""

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.singular_values.size)


@dataclass(frozen=True)
class IterativeSolveReport:
    """Outcome of an iterative solve. residual_norm is the true ‖b − A x‖."""

    solution: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class IluPreconditioner:
    """Incomplete LU factors of a square sparse matrix."""

    factor: spsla.SuperLU
    shape: tuple[int, int]
    drop_tol: float

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.factor.solve(np.asarray(rhs, dtype=float))

    @property
    def operator(self) -> spsla.LinearOperator:
        return spsla.LinearOperator(self.shape, matvec=self.solve, dtype=float)


def _as_dense(M) -> np.ndarray:
    if sp.issparse(M):
        return M.toarray()
    return np.asarray(M, dtype=float)


def _check_finite(M, what: str) -> None:
    data = M.data if sp.issparse(M) else np.asarray(M)
    if not np.all(np.isfinite(data)):
        raise NumericFailureError(f"{what} contains non-finite entries")


def _fix_signs(U: np.ndarray, Vt: np.ndarray) -> None:
    """Make the largest-magnitude entry of every left vector non-negative, in place."""
    for j in range(U.shape[1]):
        pivot = int(np.argmax(np.abs(U[:, j])))
        if U[pivot, j] < 0:
            U[:, j] *= -1.0
            Vt[j, :] *= -1.0


def numerical_rank(singular_values: np.ndarray, shape: tuple[int, int]) -> int:
    """Count singular values above the usual max(shape)·eps·σ₁ threshold."""
    if singular_values.size == 0 or singular_values[0] <= 0.0:
        return 0
    threshold = max(shape) * np.finfo(float).eps * singular_values[0]
    return int(np.count_nonzero(singular_values > threshold))


def energy_truncation(singular_values: np.ndarray, energy: float) -> int:
    """
    Smallest r with sum_{i>r} σ_i / sum_i σ_i < energy.

    Args:
        singular_values: Non-increasing, already restricted to the nonzero ones
        energy: Tail tolerance in (0, 1)

    Returns:
        Retained count (0 for an empty input)
    """
    if singular_values.size == 0:
        return 0
    total = float(singular_values.sum())
    tail = total - np.cumsum(singular_values)
    return int(np.argmax(tail / total < energy)) + 1


def truncated_svd(M, count: int | None = None, energy: float | None = None) -> SvdResult:
    """
    Thin SVD truncated by count or by the tail-energy rule.

    Args:
        M: Dense (or sparse, densified) matrix
        count: Keep min(count, rank) triplets
        energy: Keep the smallest r whose discarded singular-value mass is below energy

    Returns:
        SvdResult with deterministic signs

    Raises:
        InvalidInputError: Empty matrix or invalid rule
        NumericFailureError: Non-finite entries
    """
    if count is not None and energy is not None:
        raise InvalidInputError("truncated_svd takes either count or energy, not both")
    if count is not None and count < 1:
        raise InvalidInputError(f"count must be >= 1, got {count}")
    if energy is not None and not 0.0 < energy < 1.0:
        raise InvalidInputError(f"energy must lie in (0, 1), got {energy}")

    M = _as_dense(M)
    if M.ndim != 2 or M.size == 0:
        raise InvalidInputError(f"truncated_svd needs a non-empty 2-D matrix, got shape {M.shape}")
    _check_finite(M, "SVD input")

    try:
        U, s, Vt = sla.svd(M, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        U, s, Vt = sla.svd(M, full_matrices=False, lapack_driver="gesvd")

    rank = numerical_rank(s, M.shape)
    if energy is not None:
        keep = energy_truncation(s[:rank], energy)
    elif count is not None:
        keep = min(count, rank)
    else:
        keep = rank

    U = np.array(U[:, :keep])
    Vt = np.array(Vt[:keep, :])
    _fix_signs(U, Vt)
    return SvdResult(left_vectors=U, singular_values=np.array(s[:keep]), right_vectors=Vt.T)


def orth_extend(
    V: np.ndarray | None, newcols: np.ndarray, deflation_tol: float = DEFAULT_DEFLATION_TOL
) -> np.ndarray:
    """
    Append new directions to an orthonormal basis by modified Gram-Schmidt.

    Each incoming column is orthogonalized twice against the current basis; it
    is dropped when the remaining norm falls below deflation_tol times its
    original norm.

    Args:
        V: Orthonormal basis (N × m), None or N × 0 for an empty basis
        newcols: Columns to add (N × k or a single N-vector)
        deflation_tol: Relative deflation threshold

    Returns:
        New N × (m + accepted) matrix; the first m columns are V unchanged

    Raises:
        InvalidInputError: Row counts differ
    """
    W = np.asarray(newcols, dtype=float)
    if W.ndim == 1:
        W = W.reshape(-1, 1)
    if V is None:
        V = np.empty((W.shape[0], 0))
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != W.shape[0]:
        raise InvalidInputError(
            f"orth_extend: basis has {V.shape[0] if V.ndim == 2 else '?'} rows, "
            f"new columns have {W.shape[0]}"
        )
    _check_finite(W, "orth_extend input")

    columns = [V[:, j] for j in range(V.shape[1])]
    for j in range(W.shape[1]):
        w = W[:, j].copy()
        initial = float(np.linalg.norm(w))
        if initial == 0.0:
            continue
        for _ in range(2):
            for q in columns:
                w -= (q @ w) * q
        remaining = float(np.linalg.norm(w))
        if remaining < deflation_tol * initial:
            continue
        columns.append(w / remaining)

    if not columns:
        return np.empty((W.shape[0], 0))
    return np.column_stack(columns)


def ilu_factor(
    A, drop_tol: float = DEFAULT_DROP_TOL, fill_factor: float = 10.0
) -> IluPreconditioner:
    """
    Incomplete LU factorization for use as a GMRES preconditioner.

    Args:
        A: Square sparse matrix
        drop_tol: Drop tolerance for the incomplete factors
        fill_factor: Upper bound on fill relative to nnz(A)

    Returns:
        IluPreconditioner

    Raises:
        InvalidInputError: Non-square matrix
        PivotBreakdownError: Zero pivot or non-finite factors
    """
    A = sp.csc_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"ilu_factor needs a square matrix, got {A.shape}")
    _check_finite(A, "ILU input")
    try:
        factor = spsla.spilu(A, drop_tol=drop_tol, fill_factor=fill_factor)
    except RuntimeError as e:
        raise PivotBreakdownError(f"incomplete LU failed: {e}")

    trial = factor.solve(np.ones(A.shape[0]))
    if not np.all(np.isfinite(trial)):
        raise PivotBreakdownError("incomplete LU produced non-finite factors")
    return IluPreconditioner(factor=factor, shape=A.shape, drop_tol=drop_tol)


def gmres_solve(
    A,
    b: np.ndarray,
    tol: float = 1e-6,
    restart: int = DEFAULT_RESTART,
    precond: IluPreconditioner | None = None,
    max_iterations: int | None = None,
) -> IterativeSolveReport:
    """
    Restarted GMRES with an honest convergence report.

    Convergence is judged on the recomputed residual ‖b − A x‖ ≤ tol·‖b‖. If
    the Krylov estimate claims convergence but the true residual disagrees,
    further restart cycles run from the current iterate until the budget of
    max_iterations inner iterations (default 10·restart) is spent.

    Args:
        A: Square matrix (sparse or dense)
        b: Right-hand side
        tol: Relative tolerance
        restart: Krylov subspace size per cycle
        precond: Optional ILU preconditioner
        max_iterations: Total inner iteration budget

    Returns:
        IterativeSolveReport; non-convergence is reported, not raised

    Raises:
        InvalidInputError: Shape mismatch
        NumericFailureError: NaN in the data or iterate
    """
    b = np.asarray(b, dtype=float).ravel()
    if A.shape[0] != A.shape[1] or A.shape[0] != b.size:
        raise InvalidInputError(f"gmres_solve: matrix {A.shape} incompatible with rhs of size {b.size}")
    _check_finite(A, "GMRES matrix")
    _check_finite(b, "GMRES right-hand side")

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return IterativeSolveReport(np.zeros_like(b), 0.0, 0, True)

    budget = max_iterations if max_iterations is not None else 10 * restart
    inner = [0]

    def _count(_residual) -> None:
        inner[0] += 1

    M = precond.operator if precond is not None else None
    x = np.zeros_like(b)
    residual = b_norm
    while True:
        before = inner[0]
        cycles = max(1, math.ceil((budget - inner[0]) / restart))
        x, _info = spsla.gmres(
            A,
            b,
            x0=x,
            rtol=tol,
            atol=0.0,
            restart=restart,
            maxiter=cycles,
            M=M,
            callback=_count,
            callback_type="pr_norm",
        )
        if not np.all(np.isfinite(x)):
            raise NumericFailureError("GMRES iterate became non-finite", step=inner[0])
        residual = float(np.linalg.norm(b - A @ x))
        if residual <= tol * b_norm or inner[0] >= budget or inner[0] == before:
            break

    return IterativeSolveReport(
        solution=x,
        residual_norm=residual,
        iterations=inner[0],
        converged=residual <= tol * b_norm,
    )


def smallest_singular_value(M, dense_limit: int = DENSE_SVD_LIMIT) -> float:
    """
    σ_min of a square matrix.

    Up to dense_limit rows the matrix is densified and fully decomposed.
    Larger matrices use a sparse LU of M and Lanczos on (M^T M)^{-1}.

    Args:
        M: Square matrix
        dense_limit: Largest dimension handled densely

    Returns:
        σ_min ≥ 0 (0 for a singular matrix)

    Raises:
        InvalidInputError: Non-square or empty matrix
        NumericFailureError: Non-finite entries
    """
    if M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InvalidInputError(f"smallest_singular_value needs a square matrix, got {M.shape}")
    _check_finite(M, "inf-sup matrix")

    if M.shape[0] <= dense_limit:
        return float(sla.svdvals(_as_dense(M)).min())

    A = sp.csc_matrix(M, dtype=float)
    try:
        lu = spsla.splu(A)
    except RuntimeError:
        return 0.0

    def _apply(x: np.ndarray) -> np.ndarray:
        return lu.solve(lu.solve(np.ravel(x), trans="T"))

    op = spsla.LinearOperator(A.shape, matvec=_apply, dtype=float)
    largest = spsla.eigsh(op, k=1, which="LM", tol=1e-12, return_eigenvectors=False)[0]
    return float(1.0 / math.sqrt(largest))
