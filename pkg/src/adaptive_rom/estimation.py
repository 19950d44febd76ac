"""A-posteriori output error indicators from primal and dual residuals.

For a reduced trajectory x̂^k = V x_r^k the primal residual at a snapshot
step k splits as

    r_pr = r_pr,I + Δt (f(x̂^{k-1}) − I[f(x̂^{k-1})])

where r_pr,I = Ã x̂^{k-1} + Δt I[f(x̂^{k-1})] + Δt B u^{k-1} − Ẽ x̂^k is what
the interpolated ROM leaves unresolved. The interpolation part is estimated
by the difference to a finer interpolant (Δ_I). ‖Δ_I‖ enters without the Δt
factor, on the scale tol_EI is chosen for. Both parts are weighted by
one coefficient built from the dual solution Ẽᵀ x_du = −Cᵀ:

    original   Φ̄ = ρ̄ (‖Ẽ⁻¹‖ ‖r_du‖ + ‖x̂_du‖)
    modified   Ψ̄ = ρ̄ ‖Ẽ⁻¹‖ ‖r_du‖ + |1 − ρ̄| ‖x̂_du‖

The modified indicator estimates the error of the corrected output
ȳ_r = y_r − x̂_duᵀ r_pr. Every quantity is averaged over the snapshot steps.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spsla

from . import ui
from .errors import DegenerateRhoError, InvalidInputError, NumericFailureError, PivotBreakdownError
from .interpolation import InterpBasis, interp_error_indicator, sample
from .linalg import DEFAULT_DROP_TOL, DEFAULT_RESTART, gmres_solve, ilu_factor, orth_extend
from .models import ParameterPoint, SemiImplicitFom, TrainingSet, Trajectory
from .reduction import ReducedModel, RomTrajectory, simulate_rom
from .utils import argmax_first, map_ordered

ORIGINAL = "original"
MODIFIED = "modified"
INDICATOR_MODES = (ORIGINAL, MODIFIED)

KRYLOV = "krylov"
REDUCED_BASIS = "reduced-basis"
PRIMAL_BASIS = "primal-basis"
DUAL_STRATEGIES = (KRYLOV, REDUCED_BASIS, PRIMAL_BASIS)

DEFAULT_DUAL_TOL = 1e-6
# Residual norms below this make ρ undefined at that step
RHO_SKIP_TOL = 1e-14


# ---------------------------------------------------------------------------
# Primal side
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrimalResiduals:
    """Residuals at the snapshot steps, one column per step."""

    steps: np.ndarray
    interpolated: np.ndarray
    full: np.ndarray
    interp_norms: np.ndarray

    @property
    def interpolated_norms(self) -> np.ndarray:
        return np.linalg.norm(self.interpolated, axis=0)

    @property
    def full_norms(self) -> np.ndarray:
        return np.linalg.norm(self.full, axis=0)


def primal_residuals(
    fom: SemiImplicitFom,
    mu: ParameterPoint | None,
    rom: ReducedModel,
    trajectory: RomTrajectory,
    fine: InterpBasis | None = None,
    dt_weighted_interp: bool = False,
) -> PrimalResiduals:
    """
    Assemble r_pr,I, r_pr and ‖Δ_I‖ at every snapshot step.

    Args:
        fom: Full-order model
        mu: Parameter of the trajectory
        rom: Reduced model that produced the trajectory
        trajectory: Stable reduced trajectory
        fine: Finer interpolation basis extending rom.interp (None gives Δ_I = 0)
        dt_weighted_interp: Scale ‖Δ_I‖ by Δt like the nonlinear part of r_pr

    Returns:
        PrimalResiduals

    Raises:
        InvalidInputError: A snapshot step has no stored predecessor state
    """
    steps = trajectory.steps
    if trajectory.unstable_at is not None or steps.size == 0:
        raise InvalidInputError("residuals need a complete, stable reduced trajectory")
    if steps.max() >= trajectory.reduced_states.shape[1] or steps.min() < 1:
        raise InvalidInputError("snapshot step without a stored predecessor state")

    V = rom.V
    X_next = trajectory.lift(V, steps)
    X_prev = trajectory.lift(V, steps - 1)
    f_prev = fom.f(X_prev, mu)
    dt = fom.dt

    if rom.interp is not None:
        coefficients = rom.interp.solve(trajectory.samples[:, steps - 1])
        f_interp = rom.interp.U @ coefficients
    else:
        f_interp = f_prev

    driven = fom.A(mu) @ X_prev + dt * (fom.B @ fom.inputs(steps - 1, mu)) - fom.E(mu) @ X_next
    interpolated = driven + dt * f_interp
    full = interpolated + dt * (f_prev - f_interp)

    if fine is not None and rom.interp is not None and fine.size > rom.interp.size:
        interp_norms = np.atleast_1d(interp_error_indicator(rom.interp, fine, sample(f_prev, fine.indices)))
        if dt_weighted_interp:
            interp_norms = dt * interp_norms
    else:
        interp_norms = np.zeros(steps.size)

    return PrimalResiduals(
        steps=steps, interpolated=interpolated, full=full, interp_norms=interp_norms
    )


def rho_bar(
    fom: SemiImplicitFom,
    mu: ParameterPoint | None,
    fom_states: np.ndarray,
    lifted_states: np.ndarray,
    residuals: PrimalResiduals,
) -> float:
    """
    Time average of ρ = ‖Ẽ(x − x̂)‖ / ‖r_pr‖ over the snapshot steps.

    Args:
        fom: Full-order model
        mu: Parameter (a greedy-selected one, where FOM snapshots exist)
        fom_states: FOM states at the snapshot steps
        lifted_states: V x_r at the same steps
        residuals: Primal residuals at the same steps

    Returns:
        ρ̄

    Raises:
        InvalidInputError: Misaligned inputs
        DegenerateRhoError: Every step had a vanishing residual
    """
    if fom_states.shape != lifted_states.shape or fom_states.shape[1] != residuals.steps.size:
        raise InvalidInputError(
            f"ρ̄ inputs are misaligned: {fom_states.shape}, {lifted_states.shape}, "
            f"{residuals.steps.size} steps"
        )
    numerators = np.linalg.norm(fom.E(mu) @ (fom_states - lifted_states), axis=0)
    denominators = residuals.full_norms
    usable = denominators >= RHO_SKIP_TOL
    skipped = int(np.count_nonzero(~usable))
    if skipped:
        ui.show_debug(f"ρ̄: skipped {skipped} step(s) with vanishing residual")
    if not usable.any():
        raise DegenerateRhoError("every snapshot step has a vanishing primal residual")
    return float(np.mean(numerators[usable] / denominators[usable]))


# ---------------------------------------------------------------------------
# Dual side
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DualSolution:
    """Approximate dual solutions, one column per output row."""

    mode: str
    x_du: np.ndarray
    r_du_norms: np.ndarray
    V_du: np.ndarray | None = None
    converged: bool = True

    @property
    def x_du_norms(self) -> np.ndarray:
        return np.linalg.norm(self.x_du, axis=0)


def dual_residual_norms(E: sp.spmatrix, C: np.ndarray, x_du: np.ndarray) -> np.ndarray:
    """‖−Cᵢᵀ − Ẽᵀ x̂_du,i‖ for every output row i."""
    return np.linalg.norm(-C.T - E.T @ x_du, axis=0)


def dual_solve_nonparametric(
    fom: SemiImplicitFom,
    tol: float = 1e-6,
    drop_tol: float = DEFAULT_DROP_TOL,
    restart: int = DEFAULT_RESTART,
) -> DualSolution:
    """
    Solve Ẽᵀ x_du = −Cᵢᵀ per output row with ILU-preconditioned GMRES.

    Falls back to unpreconditioned GMRES when the incomplete factorization
    breaks down. A solve that misses tol is kept: its residual norm is still
    exact, so the indicator stays meaningful.

    Args:
        fom: Model with parameter-independent Ẽ
        tol: Relative GMRES tolerance
        drop_tol: ILU drop tolerance
        restart: GMRES restart length

    Returns:
        DualSolution in Krylov mode

    Raises:
        InvalidInputError: Ẽ depends on μ
    """
    if fom.is_E_parametric:
        raise InvalidInputError(f"{fom.name}: Ẽ depends on μ, use a reduced-basis dual")
    Et = sp.csr_matrix(fom.E(None).T)
    try:
        precond = ilu_factor(Et, drop_tol=drop_tol)
    except PivotBreakdownError as e:
        ui.show_warning(f"dual solve: {e}; continuing without preconditioner")
        precond = None

    columns, converged = [], True
    for i in range(fom.n_outputs):
        report = gmres_solve(Et, -fom.C[i], tol=tol, restart=restart, precond=precond)
        if not report.converged:
            ui.show_warning(
                f"dual solve for output {i} stopped at relative residual "
                f"{report.residual_norm / np.linalg.norm(fom.C[i]):.2e}"
            )
            converged = False
        columns.append(report.solution)
    x_du = np.column_stack(columns)
    return DualSolution(
        mode=KRYLOV,
        x_du=x_du,
        r_du_norms=dual_residual_norms(fom.E(None), fom.C, x_du),
        converged=converged,
    )


def full_dual_solve(fom: SemiImplicitFom, mu: ParameterPoint | None) -> np.ndarray:
    """Exact dual solutions at one parameter by a sparse LU of Ẽ(μ)ᵀ."""
    try:
        lu = spsla.splu(sp.csc_matrix(fom.E(mu).T))
    except RuntimeError as e:
        raise NumericFailureError(f"{fom.name}: cannot factor Ẽ(μ)ᵀ: {e}")
    return lu.solve(np.ascontiguousarray(-fom.C.T))


class DualProvider(Protocol):
    def at(self, mu: ParameterPoint | None) -> DualSolution: ...


@dataclass(frozen=True)
class FixedDual:
    """A parameter-independent dual solution."""

    solution: DualSolution

    def at(self, mu: ParameterPoint | None) -> DualSolution:
        return self.solution


@dataclass(frozen=True)
class ReducedDual:
    """
    Galerkin-reduced dual on a basis W: x̂_du(μ) = W x_r(μ) with
    (Wᵀ Ẽ(μ)ᵀ W) x_r = −Wᵀ Cᵀ.
    """

    fom: SemiImplicitFom
    W: np.ndarray
    mode: str = REDUCED_BASIS
    _projected: tuple[np.ndarray, ...] = field(default=(), repr=False, compare=False)
    _lifted: tuple[np.ndarray, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        object.__setattr__(self, "W", W)
        terms = self.fom.E_tilde.matrices
        # Ẽ(μ)ᵀ W = Σ θ_q(μ) M_qᵀ W
        lifted = tuple(np.asarray(M.T @ W) for M in terms)
        object.__setattr__(self, "_lifted", lifted)
        object.__setattr__(self, "_projected", tuple(W.T @ L for L in lifted))

    @property
    def rank(self) -> int:
        return self.W.shape[1]

    def at(self, mu: ParameterPoint | None) -> DualSolution:
        C = self.fom.C
        if self.rank == 0:
            x_du = np.zeros((self.fom.size, C.shape[0]))
            return DualSolution(self.mode, x_du, np.linalg.norm(C, axis=1), self.W)
        coords = mu.as_array() if mu is not None else np.empty(0)
        thetas = [theta(coords) for theta in self.fom.E_tilde.coefficients]
        reduced = sum(t * P for t, P in zip(thetas, self._projected, strict=True))
        lifted = sum(t * L for t, L in zip(thetas, self._lifted, strict=True))
        x_r = np.linalg.solve(reduced, -self.W.T @ C.T)
        residual = -C.T - lifted @ x_r
        return DualSolution(self.mode, self.W @ x_r, np.linalg.norm(residual, axis=0), self.W)

    def residual_estimate(self, mu: ParameterPoint | None) -> float:
        """Δ̄_du(μ): the largest dual residual norm over the output rows."""
        return float(np.max(self.at(mu).r_du_norms))


def primal_basis_dual(fom: SemiImplicitFom, V: np.ndarray) -> ReducedDual:
    """Dual reduced with the primal basis V."""
    return ReducedDual(fom, V, mode=PRIMAL_BASIS)


@dataclass(frozen=True)
class DualBasisState:
    """Dual reduced basis with its current worst parameter over the training set."""

    dual: ReducedDual
    mu_star: ParameterPoint | None
    estimate: float = float("inf")
    full_solves: int = 0

    @classmethod
    def initial(cls, fom: SemiImplicitFom, mu_star: ParameterPoint | None) -> DualBasisState:
        return cls(ReducedDual(fom, np.empty((fom.size, 0))), mu_star)


def update_v_du(
    state: DualBasisState,
    training: TrainingSet,
    tol: float = DEFAULT_DUAL_TOL,
    jobs: int = 1,
) -> DualBasisState:
    """
    One enrichment step of the dual reduced basis.

    When the dual residual estimate at μ*_du exceeds tol (relative to ‖C‖),
    the full dual is solved there and appended by Gram-Schmidt. μ*_du is then
    re-selected as the training point with the largest dual residual.

    Args:
        state: Current dual basis state
        training: Training set Ξ
        tol: Relative dual residual tolerance
        jobs: Sweep workers

    Returns:
        Updated state
    """
    fom = state.dual.fom
    scale = float(np.linalg.norm(fom.C))
    dual = state.dual
    solves = state.full_solves
    if state.estimate > tol * scale:
        solutions = full_dual_solve(fom, state.mu_star)
        W = orth_extend(dual.W, solutions)
        if W.shape[1] == dual.rank:
            ui.show_debug("dual basis: new solution already in span, basis unchanged")
        else:
            dual = ReducedDual(fom, W)
        solves += 1

    estimates = np.asarray(map_ordered(dual.residual_estimate, list(training), jobs))
    winner = argmax_first(estimates)
    return DualBasisState(dual, training[winner], float(estimates[winner]), solves)


# ---------------------------------------------------------------------------
# Indicators
# ---------------------------------------------------------------------------


def indicator_coefficient(
    mode: str, rho: float, inverse_norm: float, r_du_norm: float, x_du_norm: float
) -> float:
    """Φ̄ (original) or Ψ̄ (modified) for one output row."""
    if mode == ORIGINAL:
        return rho * (inverse_norm * r_du_norm + x_du_norm)
    if mode == MODIFIED:
        return rho * inverse_norm * r_du_norm + abs(1.0 - rho) * x_du_norm
    raise InvalidInputError(f"unknown indicator mode '{mode}'")


def _coefficient(mode: str, rho: float, inverse_norm: float, dual: DualSolution) -> float:
    # several outputs: the worst row
    return max(
        indicator_coefficient(mode, rho, inverse_norm, float(r), float(x))
        for r, x in zip(dual.r_du_norms, dual.x_du_norms, strict=True)
    )


def true_mean_output_error(reference: np.ndarray, approximation: np.ndarray) -> float:
    """
    Mean over snapshot steps of the output error (max over output rows).

    Args:
        reference: FOM outputs at the snapshot steps (N_O × K)
        approximation: ROM outputs, plain or corrected, at the same steps

    Returns:
        (1/K) Σ_i ‖y^{t_i} − ȳ_r^{t_i}‖_∞
    """
    reference = np.atleast_2d(reference)
    approximation = np.atleast_2d(approximation)
    if reference.shape != approximation.shape:
        raise InvalidInputError(
            f"output shapes differ: {reference.shape} vs {approximation.shape}"
        )
    if reference.shape[1] == 0:
        raise InvalidInputError("no snapshot outputs to compare")
    return float(np.mean(np.max(np.abs(reference - approximation), axis=0)))


@dataclass(frozen=True)
class ErrorReport:
    """
    Indicator values at one parameter.

    Both coefficient variants are kept; mode selects which one the
    est_* properties use. true_* fields are filled by with_truth when FOM
    outputs are available.
    """

    mu: ParameterPoint | None
    mode: str
    residual_norms: np.ndarray
    interp_norms: np.ndarray
    coef_original: float
    coef_modified: float
    rho_bar: float
    sigma_min: float
    outputs: np.ndarray
    corrected_outputs: np.ndarray | None
    true_error_original: float | None = None
    true_error_modified: float | None = None
    stable: bool = True

    @classmethod
    def unstable(cls, mu: ParameterPoint | None, mode: str, rho: float) -> ErrorReport:
        inf = float("inf")
        return cls(
            mu=mu,
            mode=mode,
            residual_norms=np.array([inf]),
            interp_norms=np.array([inf]),
            coef_original=inf,
            coef_modified=inf,
            rho_bar=rho,
            sigma_min=float("nan"),
            outputs=np.empty((0, 0)),
            corrected_outputs=None,
            stable=False,
        )

    @property
    def coefficient(self) -> float:
        return self.coef_original if self.mode == ORIGINAL else self.coef_modified

    def _mean(self, coef: float, norms: np.ndarray) -> float:
        if not self.stable:
            return float("inf")
        return float(coef * np.mean(norms))

    @property
    def per_step_rb(self) -> np.ndarray:
        return self.coefficient * self.residual_norms

    @property
    def per_step_ei(self) -> np.ndarray:
        return self.coefficient * self.interp_norms

    @property
    def est_rb(self) -> float:
        return self._mean(self.coefficient, self.residual_norms)

    @property
    def est_ei(self) -> float:
        return self._mean(self.coefficient, self.interp_norms)

    @property
    def est_total(self) -> float:
        return self.est_rb + self.est_ei

    @property
    def total_original(self) -> float:
        return self._mean(self.coef_original, self.residual_norms) + self._mean(
            self.coef_original, self.interp_norms
        )

    @property
    def total_modified(self) -> float:
        return self._mean(self.coef_modified, self.residual_norms) + self._mean(
            self.coef_modified, self.interp_norms
        )

    @property
    def true_error(self) -> float | None:
        return self.true_error_original if self.mode == ORIGINAL else self.true_error_modified

    @property
    def effectivity_original(self) -> float | None:
        return _ratio(self.total_original, self.true_error_original)

    @property
    def effectivity_modified(self) -> float | None:
        return _ratio(self.total_modified, self.true_error_modified)

    @property
    def effectivity(self) -> float | None:
        return _ratio(self.est_total, self.true_error)

    def with_truth(self, reference: Trajectory) -> ErrorReport:
        """Attach true mean output errors against FOM outputs at the same steps."""
        if not self.stable:
            inf = float("inf")
            return replace(self, true_error_original=inf, true_error_modified=inf)
        y = reference.snapshot_outputs
        return replace(
            self,
            true_error_original=true_mean_output_error(y, self.outputs),
            true_error_modified=true_mean_output_error(y, self.corrected_outputs),
        )


def _ratio(estimate: float, truth: float | None) -> float | None:
    if truth is None or not truth > 0.0:
        return None
    return estimate / truth


def output_indicator(
    mode: str,
    mu: ParameterPoint | None,
    residuals: PrimalResiduals,
    dual: DualSolution,
    rho: float,
    sigma_min: float | None,
    outputs: np.ndarray,
) -> ErrorReport:
    """
    Combine residuals, dual solution, ρ̄ and σ_min into an ErrorReport.

    Args:
        mode: "original" or "modified" (both coefficients are computed)
        mu: Parameter
        residuals: Primal residuals at the snapshot steps
        dual: Dual solution at μ
        rho: ρ̄
        sigma_min: σ_min(Ẽ(μ)), directly or from a surrogate
        outputs: ROM outputs at the snapshot steps

    Returns:
        ErrorReport with corrected outputs ȳ_r = y_r − x̂_duᵀ r_pr

    Raises:
        InvalidInputError: Missing σ_min or unknown mode
    """
    if mode not in INDICATOR_MODES:
        raise InvalidInputError(f"unknown indicator mode '{mode}'")
    if sigma_min is None or not np.isfinite(sigma_min):
        raise InvalidInputError("the indicator needs σ_min(Ẽ(μ))")
    inverse_norm = 1.0 / sigma_min if sigma_min > 0 else float("inf")
    return ErrorReport(
        mu=mu,
        mode=mode,
        residual_norms=residuals.interpolated_norms,
        interp_norms=residuals.interp_norms,
        coef_original=_coefficient(ORIGINAL, rho, inverse_norm, dual),
        coef_modified=_coefficient(MODIFIED, rho, inverse_norm, dual),
        rho_bar=rho,
        sigma_min=float(sigma_min),
        outputs=outputs,
        corrected_outputs=outputs - dual.x_du.T @ residuals.full,
    )


@dataclass(frozen=True)
class Evaluation:
    """Report plus the intermediate data a greedy iteration reuses."""

    report: ErrorReport
    trajectory: RomTrajectory
    residuals: PrimalResiduals | None


@dataclass(frozen=True)
class OutputErrorEstimator:
    """
    Everything needed to estimate the output error of a ROM at any μ.

    dual maps μ to a dual solution; inf_sup maps μ to σ_min(Ẽ(μ)); fine is
    the finer interpolation basis for Δ_I (None disables it) and
    dt_weighted_interp puts Δt on ‖Δ_I‖.
    """

    fom: SemiImplicitFom
    dual: DualProvider
    inf_sup: Callable[[ParameterPoint | None], float]
    mode: str = MODIFIED
    fine: InterpBasis | None = None
    dt_weighted_interp: bool = False

    def evaluate(self, rom: ReducedModel, mu: ParameterPoint | None, rho: float = 1.0) -> Evaluation:
        trajectory = simulate_rom(rom, mu)
        if not trajectory.stable:
            return Evaluation(ErrorReport.unstable(mu, self.mode, rho), trajectory, None)
        residuals = primal_residuals(
            self.fom, mu, rom, trajectory, self.fine, dt_weighted_interp=self.dt_weighted_interp
        )
        report = output_indicator(
            self.mode,
            mu,
            residuals,
            self.dual.at(mu),
            rho,
            self.inf_sup(mu),
            trajectory.snapshot_outputs,
        )
        if not np.isfinite(report.est_total):
            return Evaluation(ErrorReport.unstable(mu, self.mode, rho), trajectory, None)
        return Evaluation(report, trajectory, residuals)

    def estimate(self, rom: ReducedModel, mu: ParameterPoint | None, rho: float = 1.0) -> ErrorReport:
        """ErrorReport at μ; an unstable ROM gives a report with infinite estimates."""
        return self.evaluate(rom, mu, rho).report
