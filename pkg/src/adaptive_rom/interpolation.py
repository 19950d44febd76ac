"""Empirical interpolation of the nonlinear term (EIM and DEIM).

An interpolation basis is a pair (U_f, ℘): N × ℓ_EI vectors and ℓ_EI distinct
row indices. The interpolant of f is I[f] = U_f (PᵀU_f)⁻¹ Pᵀf, so only the
entries f[℘] are ever needed. Argmax ties always go to the smallest index.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import ui
from .errors import InterpolationDegeneracyError, InvalidInputError
from .linalg import truncated_svd

EIM = "EIM"
DEIM = "DEIM"
METHODS = (EIM, DEIM)
DEFAULT_FINE_MARGIN = 5
# 1/cond(PᵀU_f) below this is treated as singular
_DEGENERACY_RCOND = 1e-14
# EIM residuals below this fraction of the largest snapshot norm are round-off
_EXHAUSTED_RTOL = 1e-12


@dataclass(frozen=True)
class InterpBasis:
    """Interpolation vectors U_f with their interpolation indices ℘."""

    U: np.ndarray
    indices: tuple[int, ...]
    method: str
    _lu: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 2 or U.shape[1] != len(self.indices):
            raise InvalidInputError(
                f"interpolation basis has {U.shape[1] if U.ndim == 2 else '?'} vectors "
                f"but {len(self.indices)} indices"
            )
        if len(set(self.indices)) != len(self.indices):
            raise InvalidInputError("interpolation indices must be distinct")
        if self.indices and (min(self.indices) < 0 or max(self.indices) >= U.shape[0]):
            raise InvalidInputError(f"interpolation indices out of range [0, {U.shape[0]})")
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown interpolation method '{self.method}'")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if self.size and self.method == DEIM:
            object.__setattr__(self, "_lu", _factor(self.PtU))

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def n_rows(self) -> int:
        return self.U.shape[0]

    @property
    def PtU(self) -> np.ndarray:
        return self.U[list(self.indices), :]

    def truncate(self, count: int) -> InterpBasis:
        """First count vectors and indices (both builders produce nested bases)."""
        count = max(0, min(count, self.size))
        return InterpBasis(self.U[:, :count].copy(), self.indices[:count], self.method)

    def solve(self, f_at_indices: np.ndarray) -> np.ndarray:
        """Coefficients c with (PᵀU_f) c = f[℘], for one or several columns."""
        rhs = np.asarray(f_at_indices, dtype=float)
        if rhs.shape[0] != self.size:
            raise InvalidInputError(f"expected {self.size} samples, got {rhs.shape[0]}")
        if self.size == 0:
            return np.zeros((0,) + rhs.shape[1:])
        if self.method == EIM:
            PtU = self.PtU
            _check_conditioning(PtU)
            return sla.solve_triangular(PtU, rhs, lower=True, unit_diagonal=True)
        return sla.lu_solve(self._lu, rhs)

    def coupling(self, V: np.ndarray) -> np.ndarray:
        """The precomputable matrix Vᵀ U_f (PᵀU_f)⁻¹ of size ℓ_RB × ℓ_EI."""
        if self.size == 0:
            return np.zeros((V.shape[1], 0))
        VtU = V.T @ self.U
        # (VᵀU)(PᵀU)⁻¹ = ((PᵀU)⁻ᵀ (VᵀU)ᵀ)ᵀ
        if self.method == EIM:
            _check_conditioning(self.PtU)
            return sla.solve_triangular(self.PtU, VtU.T, lower=True, unit_diagonal=True, trans="T").T
        return sla.lu_solve(self._lu, VtU.T, trans=1).T


def _check_conditioning(PtU: np.ndarray) -> None:
    if PtU.size == 0:
        return
    if not np.all(np.isfinite(PtU)):
        raise InterpolationDegeneracyError("PᵀU_f has non-finite entries")
    rcond = 1.0 / np.linalg.cond(PtU)
    if not rcond > _DEGENERACY_RCOND:
        raise InterpolationDegeneracyError(f"PᵀU_f is singular (rcond {rcond:.2e})")


def _factor(PtU: np.ndarray):
    _check_conditioning(PtU)
    return sla.lu_factor(PtU)


def apply_interp(
    basis: InterpBasis, f_at_indices: np.ndarray, lift: bool = False
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """
    Interpolation coefficients of sampled nonlinear values.

    Args:
        basis: Interpolation basis
        f_at_indices: f[℘] (ℓ_EI,) or (ℓ_EI, K)
        lift: Also return the full interpolant U_f c

    Returns:
        c, or (c, U_f c) when lift is set

    Raises:
        InterpolationDegeneracyError: PᵀU_f singular
    """
    c = basis.solve(f_at_indices)
    if lift:
        return c, basis.U @ c
    return c


@dataclass(frozen=True)
class NonlinearSnapshotPool:
    """Nonlinear snapshots of all greedy-selected parameters, block by block."""

    blocks: tuple[np.ndarray, ...] = ()
    labels: tuple[tuple[float, ...] | None, ...] = ()

    def __post_init__(self):
        if len(self.blocks) != len(self.labels):
            raise InvalidInputError("every snapshot block needs a label")
        rows = {b.shape[0] for b in self.blocks}
        if len(rows) > 1:
            raise InvalidInputError(f"snapshot blocks have different row counts {sorted(rows)}")
        for b in self.blocks:
            if not np.all(np.isfinite(b)):
                raise InvalidInputError("nonlinear snapshots must be finite")

    @classmethod
    def from_matrix(cls, F: np.ndarray, label: tuple[float, ...] | None = None):
        return cls((np.asarray(F, dtype=float),), (label,))

    def append(self, F: np.ndarray, label: tuple[float, ...] | None) -> NonlinearSnapshotPool:
        """Pool with one more parameter's snapshot block."""
        return NonlinearSnapshotPool(
            self.blocks + (np.asarray(F, dtype=float),), self.labels + (label,)
        )

    @property
    def matrix(self) -> np.ndarray:
        if not self.blocks:
            raise InvalidInputError("nonlinear snapshot pool is empty")
        return np.hstack(self.blocks)

    @property
    def ranges(self) -> list[tuple[int, int]]:
        out, start = [], 0
        for b in self.blocks:
            out.append((start, start + b.shape[1]))
            start += b.shape[1]
        return out

    @property
    def n_columns(self) -> int:
        return sum(b.shape[1] for b in self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)


def _first_argmax_abs(v: np.ndarray) -> int:
    return int(np.argmax(np.abs(v)))


def eim_build(pool: NonlinearSnapshotPool | np.ndarray, max_iter: int, eps: float) -> InterpBasis:
    """
    Greedy EIM over a snapshot pool.

    The first vector is the snapshot of largest norm scaled to 1 at its
    largest-magnitude entry. Each further vector is the interpolation residual
    of the worst-approximated snapshot, scaled the same way. The loop stops
    after max_iter vectors, or when the worst residual norm drops below eps.

    Args:
        pool: Snapshot pool or a plain N × n matrix
        max_iter: Maximum number of vectors
        eps: Residual-norm stopping tolerance

    Returns:
        InterpBasis with unit lower-triangular PᵀU_f
    """
    if max_iter < 1:
        raise InvalidInputError(f"max_iter must be >= 1, got {max_iter}")
    F = pool.matrix if isinstance(pool, NonlinearSnapshotPool) else np.asarray(pool, dtype=float)
    if F.ndim != 2 or F.size == 0:
        raise InvalidInputError("EIM needs a non-empty snapshot matrix")

    # Residuals of every snapshot against the current interpolant, updated by
    # rank-one corrections (the nested interpolant differs by ζ_m r[℘_m]).
    R = F.copy()
    floor = _EXHAUSTED_RTOL * float(np.linalg.norm(F, axis=0).max())
    vectors: list[np.ndarray] = []
    indices: list[int] = []
    while len(vectors) < max_iter:
        norms = np.linalg.norm(R, axis=0)
        worst = int(np.argmax(norms))
        exhausted = norms[worst] <= floor
        if exhausted or (vectors and norms[worst] < eps):
            if exhausted:
                ui.show_debug(f"EIM: pool exhausted after {len(vectors)} vectors")
            break
        eta = R[:, worst]
        pivot = _first_argmax_abs(eta)
        zeta = eta / eta[pivot]
        vectors.append(zeta)
        indices.append(pivot)
        R = R - np.outer(zeta, R[pivot, :])
        R[pivot, :] = 0.0

    if not vectors:
        return InterpBasis(np.empty((F.shape[0], 0)), (), EIM)
    return InterpBasis(np.column_stack(vectors), tuple(indices), EIM)


def deim_indices(U: np.ndarray) -> tuple[int, ...]:
    """Greedy DEIM index selection for the columns of U, in order."""
    indices = [_first_argmax_abs(U[:, 0])]
    for m in range(1, U.shape[1]):
        Um = U[:, :m]
        c = np.linalg.solve(Um[indices, :], U[indices, m])
        residual = U[:, m] - Um @ c
        indices.append(_first_argmax_abs(residual))
    return tuple(indices)


def deim_build(
    pool: NonlinearSnapshotPool | np.ndarray,
    count: int | None = None,
    energy: float | None = None,
    warn: bool = True,
) -> InterpBasis:
    """
    DEIM basis from the POD of the nonlinear snapshots.

    Args:
        pool: Snapshot pool or plain matrix
        count: Number of vectors (clamped to the pool rank)
        energy: Tail-energy tolerance when count is not given
        warn: Report clamping of count to the pool rank

    Returns:
        InterpBasis
    """
    F = pool.matrix if isinstance(pool, NonlinearSnapshotPool) else np.asarray(pool, dtype=float)
    svd = truncated_svd(F, count=count, energy=energy)
    if warn and count is not None and svd.rank < count:
        ui.show_warning(f"DEIM: requested {count} vectors, pool rank is {svd.rank}; clamped")
    if svd.rank == 0:
        return InterpBasis(np.empty((F.shape[0], 0)), (), DEIM)
    U = svd.left_vectors
    return InterpBasis(U, deim_indices(U), DEIM)


def update_ei(
    pool: NonlinearSnapshotPool, n_ei: int, method: str, eps: float
) -> InterpBasis:
    """
    Rebuild the interpolation basis at a target size from the whole pool.

    EIM runs with max_iter = n_ei and stopping tolerance eps; DEIM keeps
    exactly n_ei singular vectors. The result has min(n_ei, achievable) vectors.

    Args:
        pool: Nonlinear snapshots of every selected parameter
        n_ei: Target number of interpolation vectors (≥ 1)
        method: "EIM" or "DEIM"
        eps: EIM stopping tolerance

    Returns:
        InterpBasis
    """
    if n_ei < 1:
        raise InvalidInputError(f"interpolation size must be >= 1, got {n_ei}")
    if method == EIM:
        return eim_build(pool, max_iter=n_ei, eps=eps)
    if method == DEIM:
        return deim_build(pool, count=n_ei)
    raise InvalidInputError(f"unknown interpolation method '{method}'")


def build_interp_pair(
    pool: NonlinearSnapshotPool,
    n_ei: int,
    method: str,
    eps: float,
    margin: int = DEFAULT_FINE_MARGIN,
) -> tuple[InterpBasis, InterpBasis | None]:
    """
    Coarse basis of size n_ei and the finer basis used for Δ_I.

    The fine basis comes from finer_basis, so it always extends the coarse
    one. It is None when the pool cannot support more than the coarse size.

    Args:
        pool: Nonlinear snapshot pool
        n_ei: Coarse size
        method: "EIM" or "DEIM"
        eps: EIM stopping tolerance for the coarse basis
        margin: Extra vectors of the fine basis

    Returns:
        (coarse, fine or None)
    """
    coarse = update_ei(pool, n_ei, method, eps)
    return coarse, finer_basis(pool, coarse, margin)


def finer_basis(
    pool: NonlinearSnapshotPool, coarse: InterpBasis, margin: int = DEFAULT_FINE_MARGIN
) -> InterpBasis | None:
    """Basis of size coarse.size + margin (or the pool limit) whose leading part is coarse."""
    if coarse.method == EIM:
        # no eps stop here, otherwise it would never extend the coarse one
        fine = eim_build(pool, max_iter=coarse.size + margin, eps=0.0)
    else:
        fine = deim_build(pool, count=coarse.size + margin, warn=False)
    if fine.size <= coarse.size:
        return None
    return fine


def interp_error_indicator(
    coarse: InterpBasis,
    fine: InterpBasis,
    f_samples: np.ndarray,
    gram: np.ndarray | None = None,
) -> np.ndarray:
    """
    Norm of Δ_I = Π^{ℓ'}(I − Π^ℓ) f for nested bases.

    For nested bases this is the difference of the two interpolants,
    I^{ℓ'}[f] − I^{ℓ}[f] = U' (c' − [c; 0]), so only f at the fine index set
    (which contains the coarse one) is needed, and its norm follows from the
    Gram matrix of U'.

    Args:
        coarse: Basis with ℓ vectors
        fine: Basis with ℓ' > ℓ vectors whose first ℓ vectors and indices are coarse's
        f_samples: f at fine.indices, (ℓ',) or (ℓ', K)
        gram: Optional precomputed U'ᵀU'

    Returns:
        ‖Δ_I‖ per column (scalar array for a single vector)

    Raises:
        InvalidInputError: ℓ' ≤ ℓ or the bases are not nested
    """
    ell, ell_fine = coarse.size, fine.size
    if ell_fine <= ell:
        raise InvalidInputError(f"fine basis ({ell_fine}) must be larger than coarse ({ell})")
    if fine.indices[:ell] != coarse.indices:
        raise InvalidInputError("fine interpolation basis does not extend the coarse one")

    samples = np.asarray(f_samples, dtype=float)
    single = samples.ndim == 1
    if single:
        samples = samples[:, None]
    c_fine = fine.solve(samples)
    c_coarse = coarse.solve(samples[:ell])
    delta = c_fine.copy()
    delta[:ell] -= c_coarse
    if gram is None:
        gram = fine.U.T @ fine.U
    sq = np.einsum("ik,ij,jk->k", delta, gram, delta)
    norms = np.sqrt(np.maximum(sq, 0.0))
    return norms[0] if single else norms


def sample(f: np.ndarray, indices: Sequence[int]) -> np.ndarray:
    """Rows of f (vector or column-stacked states) at indices."""
    return np.asarray(f)[list(indices)]
