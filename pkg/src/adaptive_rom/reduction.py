"""POD bases, Galerkin reduced models and the reduced time stepper."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ui
from .errors import InvalidInputError, RomInstabilityError
from .interpolation import InterpBasis
from .linalg import DEFAULT_DEFLATION_TOL, orth_extend, truncated_svd
from .models import (
    ParameterPoint,
    ProjectedOperator,
    RestrictedNonlinearity,
    SemiImplicitFom,
)

DEFAULT_ADSS_TOL = 1e-5
# Reduced states beyond this norm count as diverged
DIVERGENCE_LIMIT = 1e10

Provenance = tuple[tuple[float, ...] | None, int]


@dataclass(frozen=True)
class ReducedBasis:
    """
    Orthonormal reduced basis V with per-column provenance.

    provenance[j] is (μ coords, POD mode index) of the snapshot POD that
    produced column j; μ is None for bases built without a parameter.
    """

    V: np.ndarray
    provenance: tuple[Provenance, ...] = ()

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        if V.ndim != 2:
            raise InvalidInputError(f"basis must be 2-D, got shape {V.shape}")
        provenance = tuple(self.provenance) or tuple((None, j) for j in range(V.shape[1]))
        if len(provenance) != V.shape[1]:
            raise InvalidInputError(
                f"basis has {V.shape[1]} columns but {len(provenance)} provenance entries"
            )
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "provenance", provenance)

    @classmethod
    def empty(cls, size: int) -> ReducedBasis:
        return cls(np.empty((size, 0)), ())

    @property
    def rank(self) -> int:
        return self.V.shape[1]

    @property
    def size(self) -> int:
        return self.V.shape[0]

    def truncate(self, count: int) -> ReducedBasis:
        count = max(0, min(count, self.rank))
        return ReducedBasis(self.V[:, :count].copy(), self.provenance[:count])

    def drop_last(self, count: int) -> ReducedBasis:
        """Remove the newest count columns (MGS ordering keeps the rest orthonormal)."""
        return self.truncate(self.rank - count)

    def extend(
        self,
        newcols: np.ndarray,
        mu: tuple[float, ...] | None = None,
        deflation_tol: float = DEFAULT_DEFLATION_TOL,
    ) -> ReducedBasis:
        """
        Append POD modes by Gram-Schmidt, dropping directions already spanned.

        Args:
            newcols: Columns in mode order
            mu: Parameter the modes came from
            deflation_tol: Relative deflation threshold

        Returns:
            New basis; the existing columns are unchanged
        """
        W = np.asarray(newcols, dtype=float)
        if W.ndim == 1:
            W = W[:, None]
        V = self.V
        provenance = list(self.provenance)
        for j in range(W.shape[1]):
            grown = orth_extend(V, W[:, j], deflation_tol)
            if grown.shape[1] > V.shape[1]:
                provenance.append((mu, j))
                V = grown
            else:
                ui.show_debug(f"basis extension: mode {j} already in span, skipped")
        return ReducedBasis(V, tuple(provenance))

    def project(self, X: np.ndarray) -> np.ndarray:
        """Component of X orthogonal to span(V)."""
        return X - self.V @ (self.V.T @ X)


def pod(
    X: np.ndarray,
    count: int | None = None,
    energy: float | None = None,
    mu: tuple[float, ...] | None = None,
) -> ReducedBasis:
    """
    Proper orthogonal decomposition of a snapshot matrix.

    Args:
        X: Snapshots (N × n), non-empty
        count: Keep this many leading left singular vectors
        energy: Tail-energy tolerance ε_POD when count is not given
        mu: Parameter recorded as provenance

    Returns:
        ReducedBasis (empty for a zero matrix)
    """
    svd = truncated_svd(X, count=count, energy=energy)
    return ReducedBasis(svd.left_vectors, tuple((mu, j) for j in range(svd.rank)))


@dataclass(frozen=True)
class ReducedModel:
    """
    Galerkin ROM with an optional interpolated nonlinearity.

    Without an interpolation basis the nonlinear term is projected exactly,
    Vᵀ f(V x_r), which costs a full-dimensional evaluation per step.
    """

    fom: SemiImplicitFom
    basis: ReducedBasis
    E_r: ProjectedOperator
    A_r: ProjectedOperator
    B_r: np.ndarray
    C_r: np.ndarray
    x0_r: np.ndarray
    interp: InterpBasis | None = None
    coupling: np.ndarray | None = None
    restricted: RestrictedNonlinearity | None = None
    lifting: np.ndarray | None = None

    @property
    def V(self) -> np.ndarray:
        return self.basis.V

    @property
    def n_rb(self) -> int:
        return self.basis.rank

    @property
    def n_ei(self) -> int:
        return self.interp.size if self.interp is not None else 0

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.fom.size, self.n_rb, self.n_ei


def project_rom(
    fom: SemiImplicitFom, basis: ReducedBasis, interp: InterpBasis | None = None
) -> ReducedModel:
    """
    Build the Galerkin ROM W = V.

    The affine terms of Ẽ and Ã are projected once and reassembled per μ.
    With an interpolation basis, the coupling Vᵀ U_f (PᵀU_f)⁻¹ and the
    stencil-restricted evaluator of f at ℘ are precomputed.

    Args:
        fom: Full-order model
        basis: Reduced basis (N rows, at least one column)
        interp: Optional interpolation basis

    Returns:
        ReducedModel

    Raises:
        InvalidInputError: Dimension mismatch or empty basis
        InterpolationDegeneracyError: Singular PᵀU_f
    """
    V = basis.V
    if V.shape[0] != fom.size:
        raise InvalidInputError(f"basis has {V.shape[0]} rows, model has N = {fom.size}")
    if basis.rank == 0:
        raise InvalidInputError("cannot project onto an empty basis")

    coupling = restricted = lifting = None
    if interp is not None:
        if interp.n_rows != fom.size:
            raise InvalidInputError(
                f"interpolation basis has {interp.n_rows} rows, model has N = {fom.size}"
            )
        coupling = interp.coupling(V)
        restricted = fom.restrict(interp.indices)
        lifting = V[restricted.closure, :]

    return ReducedModel(
        fom=fom,
        basis=basis,
        E_r=fom.E_tilde.project(V),
        A_r=fom.A_tilde.project(V),
        B_r=np.asarray(fom.B.T @ V).T,
        C_r=fom.C @ V,
        x0_r=V.T @ fom.initial_state(),
        interp=interp,
        coupling=coupling,
        restricted=restricted,
        lifting=lifting,
    )


@dataclass(frozen=True)
class RomTrajectory:
    """
    Reduced states at every step plus what the estimators need.

    reduced_states has K+1 columns (x_r^0 … x_r^K); outputs has K columns
    (steps 1 … K); samples holds f at ℘ for the states x_r^0 … x_r^{K-1}.
    When the run diverged, unstable_at is the failing step and the arrays
    stop before it.
    """

    mu: ParameterPoint | None
    reduced_states: np.ndarray
    outputs: np.ndarray
    samples: np.ndarray | None
    steps: np.ndarray
    unstable_at: int | None = None

    @property
    def stable(self) -> bool:
        return self.unstable_at is None

    @property
    def snapshot_outputs(self) -> np.ndarray:
        return self.outputs[:, self.steps - 1]

    def lift(self, V: np.ndarray, steps: np.ndarray | None = None) -> np.ndarray:
        """Full states V x_r at the given steps (0-based state columns)."""
        cols = self.steps if steps is None else steps
        return V @ self.reduced_states[:, cols]

    def require_stable(self) -> RomTrajectory:
        if self.unstable_at is not None:
            raise RomInstabilityError("reduced trajectory diverged", step=self.unstable_at)
        return self


def simulate_rom(
    rom: ReducedModel,
    mu: ParameterPoint | None,
    raise_on_instability: bool = False,
    divergence_limit: float = DIVERGENCE_LIMIT,
) -> RomTrajectory:
    """
    Step the reduced model over the full time grid.

    The reduced step matrices E_r⁻¹A_r, Δt E_r⁻¹·coupling and the input
    contributions are formed once per μ, so the loop only touches ℓ_RB and
    ℓ_EI sized data plus the stencil closure of ℘.

    Args:
        rom: Reduced model
        mu: Parameter point
        raise_on_instability: Raise instead of returning a truncated trajectory
        divergence_limit: Norm bound beyond which a reduced state counts as diverged

    Returns:
        RomTrajectory (unstable_at set when the run diverged)

    Raises:
        InvalidInputError: μ outside the domain
        RomInstabilityError: Only with raise_on_instability
    """
    fom = rom.fom
    mu = fom.check_point(mu)
    total = fom.n_steps(mu)
    steps = fom.snapshot_steps(mu)
    ell = rom.n_rb

    E_r = rom.E_r.assemble(mu)
    try:
        step_A = np.linalg.solve(E_r, rom.A_r.assemble(mu))
        inputs = np.linalg.solve(E_r, fom.dt * rom.B_r) @ fom.inputs(range(total), mu)
        if rom.interp is not None:
            step_f = np.linalg.solve(E_r, fom.dt * rom.coupling)
        else:
            step_f = np.linalg.solve(E_r, fom.dt * rom.V.T)
    except np.linalg.LinAlgError:
        if raise_on_instability:
            raise RomInstabilityError("reduced system matrix is singular", step=0)
        return _unstable(mu, ell, fom.n_outputs, rom.n_ei, steps, 0, rom)

    states = np.empty((ell, total + 1))
    states[:, 0] = rom.x0_r
    samples = np.empty((rom.n_ei, total)) if rom.interp is not None else None
    x = rom.x0_r
    unstable_at = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(total):
            if rom.interp is not None:
                g = rom.restricted(rom.lifting @ x, mu)
                samples[:, k] = g
            else:
                g = fom.f(rom.V @ x, mu)
            x = step_A @ x + step_f @ g + inputs[:, k]
            if not np.all(np.isfinite(x)) or np.linalg.norm(x) > divergence_limit:
                unstable_at = k + 1
                break
            states[:, k + 1] = x

    if unstable_at is not None:
        if raise_on_instability:
            raise RomInstabilityError("reduced trajectory diverged", step=unstable_at)
        ui.show_debug(f"ROM {rom.dims} unstable at step {unstable_at}")
        return RomTrajectory(
            mu=mu,
            reduced_states=states[:, :unstable_at],
            outputs=rom.C_r @ states[:, 1:unstable_at],
            samples=samples[:, : unstable_at - 1] if samples is not None else None,
            steps=steps[steps < unstable_at],
            unstable_at=unstable_at,
        )

    return RomTrajectory(
        mu=mu,
        reduced_states=states,
        outputs=rom.C_r @ states[:, 1:],
        samples=samples,
        steps=steps,
    )


def _unstable(mu, ell, n_outputs, n_ei, steps, at, rom) -> RomTrajectory:
    return RomTrajectory(
        mu=mu,
        reduced_states=np.asarray(rom.x0_r).reshape(ell, 1),
        outputs=np.empty((n_outputs, 0)),
        samples=np.empty((n_ei, 0)) if rom.interp is not None else None,
        steps=steps[:0],
        unstable_at=at,
    )


def adss_filter(X: np.ndarray, angle_tol: float = DEFAULT_ADSS_TOL) -> tuple[np.ndarray, np.ndarray]:
    """
    Adaptive snapshot selection by sequential angles.

    Columns are scanned in time order. The first nonzero column is kept; a
    later column is kept when the sine of its angle to the last kept column
    is at least angle_tol. Zero columns have no angle and are skipped.

    Args:
        X: Snapshots (N × n), non-empty
        angle_tol: Sine threshold in (0, 1)

    Returns:
        (kept column indices, X restricted to them)
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.size == 0:
        raise InvalidInputError(f"adss_filter needs a non-empty 2-D matrix, got shape {X.shape}")
    if not 0.0 < angle_tol < 1.0:
        raise InvalidInputError(f"angle_tol must lie in (0, 1), got {angle_tol}")

    kept: list[int] = []
    last = None
    zero = 0
    for j in range(X.shape[1]):
        norm = float(np.linalg.norm(X[:, j]))
        if norm == 0.0:
            zero += 1
            continue
        u = X[:, j] / norm
        if last is None or np.linalg.norm(u - (last @ u) * last) >= angle_tol:
            kept.append(j)
            last = u
    if zero:
        ui.show_warning(f"AdSS: skipped {zero} zero snapshot column(s)")

    idx = np.asarray(kept, dtype=np.intp)
    return idx, X[:, idx]
