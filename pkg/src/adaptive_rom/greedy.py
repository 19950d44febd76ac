"""Greedy basis construction drivers.

pod_greedy_standard          POD-Greedy with the exact projected nonlinearity
pod_greedy_deim_standard     POD-Greedy with an interpolation basis built
                             beforehand from FOM runs at every training point
adaptive_pod_greedy_deim     POD-Greedy-(D)EIM with both basis sizes adapted
                             from the split error estimate each iteration
adaptive_pod_deim_twoway     size adaptation of precomputed bases for a
                             non-parametric model

The adaptive drivers stop once the estimate at μ* falls in the zone of
acceptance [ε*, tol].
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from . import ui
from .errors import DegenerateRhoError, InvalidInputError
from .estimation import (
    DUAL_STRATEGIES,
    INDICATOR_MODES,
    KRYLOV,
    MODIFIED,
    PRIMAL_BASIS,
    REDUCED_BASIS,
    DualBasisState,
    ErrorReport,
    Evaluation,
    FixedDual,
    OutputErrorEstimator,
    dual_solve_nonparametric,
    output_indicator,
    primal_basis_dual,
    rho_bar,
    update_v_du,
)
from .infsup import InfSupSurrogate, build_surrogate
from .interpolation import (
    EIM,
    METHODS,
    InterpBasis,
    NonlinearSnapshotPool,
    build_interp_pair,
    deim_build,
    eim_build,
    finer_basis,
)
from .linalg import smallest_singular_value
from .models import ParameterPoint, SemiImplicitFom, TrainingSet, Trajectory, simulate_fom
from .reduction import ReducedBasis, ReducedModel, adss_filter, pod, project_rom
from .utils import PhaseTimer, argmax_first, map_ordered

ZOA = "zoa"
TOL = "tol"
FLOOR = "floor"
MAX_ITER = "max_iter"
STAGNATION = "stagnation"
ACCEPTED = (ZOA, TOL, FLOOR)

AUTO = "auto"
SURROGATE = "surrogate"
DIRECT = "direct"

# Ratios standing in for log10(Δ̄/tol) when Δ̄ is zero or not finite
_ZERO_RATIO = 1e-16
_NONFINITE_RATIO = 1e3


@dataclass(frozen=True)
class GreedyConfig:
    """Settings shared by every greedy driver."""

    tol: float = 1e-3
    tol_ei: float | None = None
    zoa_lower: float | None = None
    max_iter: int = 30
    eps_pod: float = 1e-10
    eps_ei: float = 1e-10
    method: str = EIM
    initial_rb: int = 1
    initial_ei: int = 2
    seed: int | None = None
    dual_strategy: str = AUTO
    indicator: str = MODIFIED
    fine_margin: int = 5
    dt_weighted_interp: bool = False
    adss_tol: float | None = None
    shrink_cap: int = 3
    stagnation_window: int = 3
    dual_tol: float = 1e-6
    gmres_tol: float = 1e-6
    ilu_drop_tol: float = 1e-3
    infsup: str = SURROGATE
    jobs: int = 1

    @property
    def ei_tolerance(self) -> float:
        """tol_EI, 0.01·tol unless given."""
        return self.tol_ei if self.tol_ei is not None else 0.01 * self.tol

    @property
    def eps_star(self) -> float:
        """Lower edge of the zone of acceptance, 0.1·tol unless given."""
        return self.zoa_lower if self.zoa_lower is not None else 0.1 * self.tol

    def validate(self) -> list[str]:
        """Diagnostics naming each offending field (empty when valid)."""
        errors = []
        if not self.tol > 0:
            errors.append(f"greedy.tol: must be positive, got {self.tol}")
        elif not 0 < self.eps_star < self.tol:
            errors.append(f"greedy.zoa_lower: must lie in (0, tol), got {self.eps_star}")
        if not 0 < self.ei_tolerance <= self.tol:
            errors.append(f"greedy.tol_ei: must lie in (0, tol], got {self.ei_tolerance}")
        if self.max_iter < 1:
            errors.append(f"greedy.max_iter: must be >= 1, got {self.max_iter}")
        for name in ("eps_pod", "eps_ei"):
            value = getattr(self, name)
            if not 0 < value < 1:
                errors.append(f"greedy.{name}: must lie in (0, 1), got {value}")
        if self.method not in METHODS:
            errors.append(f"greedy.method: must be one of {', '.join(METHODS)}, got '{self.method}'")
        if self.initial_rb < 1:
            errors.append(f"greedy.initial_rb: must be >= 1, got {self.initial_rb}")
        if self.initial_ei <= self.initial_rb:
            errors.append(
                f"greedy.initial_ei: must exceed initial_rb ({self.initial_rb}), got {self.initial_ei}"
            )
        if self.dual_strategy not in (AUTO, *DUAL_STRATEGIES):
            errors.append(f"greedy.dual_strategy: unknown strategy '{self.dual_strategy}'")
        if self.indicator not in INDICATOR_MODES:
            errors.append(f"greedy.indicator: must be one of {', '.join(INDICATOR_MODES)}")
        if self.fine_margin < 1:
            errors.append(f"greedy.fine_margin: must be >= 1, got {self.fine_margin}")
        if self.adss_tol is not None and not 0 < self.adss_tol < 1:
            errors.append(f"greedy.adss_tol: must lie in (0, 1), got {self.adss_tol}")
        if self.shrink_cap < 1:
            errors.append(f"greedy.shrink_cap: must be >= 1, got {self.shrink_cap}")
        if self.stagnation_window < 1:
            errors.append(f"greedy.stagnation_window: must be >= 1, got {self.stagnation_window}")
        if self.infsup not in (SURROGATE, DIRECT):
            errors.append(f"greedy.infsup: must be '{SURROGATE}' or '{DIRECT}', got '{self.infsup}'")
        if self.jobs < 1:
            errors.append(f"greedy.jobs: must be >= 1, got {self.jobs}")
        return errors

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GreedyConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidInputError(f"unknown greedy settings: {', '.join(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class IterationRecord:
    """
    One row of the convergence log.

    mu is the parameter the iteration worked on. The est_* values, the true
    error and the effectivities are taken at the most recent parameter with
    FOM data (the same as mu whenever the iteration ran the FOM); est_max is
    the estimate at the next μ*, the maximum over the training set.
    """

    iteration: int
    mu: tuple[float, ...] | None
    n_rb: int
    n_ei: int
    rb_increment: int
    est_rb: float
    est_ei: float
    est_total: float
    est_max: float
    true_error: float | None
    rho_bar: float
    eff_original: float | None
    eff_modified: float | None
    wall_time: float

    def to_row(self) -> dict[str, Any]:
        row = asdict(self)
        row["mu"] = " ".join(f"{c:.10g}" for c in self.mu) if self.mu else ""
        return row


@dataclass(frozen=True)
class BasisUpdate:
    """Outcome of the size adaptation rule."""

    p: int
    d: int
    p0: int
    d0: int
    rb_next: int
    ei_next: int


@dataclass
class GreedyState:
    """Everything a greedy run produced, updated in place while it runs."""

    pipeline: str
    basis: ReducedBasis
    interp: InterpBasis | None = None
    fine: InterpBasis | None = None
    pool: NonlinearSnapshotPool = field(default_factory=NonlinearSnapshotPool)
    records: list[IterationRecord] = field(default_factory=list)
    selected: list[ParameterPoint | None] = field(default_factory=list)
    termination: str | None = None
    fom_solves: int = 0
    rho_bar: float = 1.0
    dual_basis: np.ndarray | None = None
    surrogate: InfSupSurrogate | None = None
    estimator: OutputErrorEstimator | None = None
    updates: list[BasisUpdate] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def n_rb(self) -> int:
        return self.basis.rank

    @property
    def n_ei(self) -> int:
        return self.interp.size if self.interp is not None else 0

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def accepted(self) -> bool:
        return self.termination in ACCEPTED

    @property
    def max_estimate(self) -> float | None:
        return self.records[-1].est_max if self.records else None

    @property
    def max_true_error(self) -> float | None:
        values = [r.true_error for r in self.records if r.true_error is not None]
        return values[-1] if values else None

    def rom(self, fom: SemiImplicitFom) -> ReducedModel:
        return project_rom(fom, self.basis, self.interp)


# ---------------------------------------------------------------------------
# Adaptation rule
# ---------------------------------------------------------------------------


def _log_ratio(estimate: float, tol: float) -> float:
    if estimate == 0.0:
        return math.log10(_ZERO_RATIO)
    if not math.isfinite(estimate):
        return math.log10(_NONFINITE_RATIO)
    return math.log10(estimate / tol)


def _split(log_ratio: float) -> tuple[int, int]:
    floored = math.floor(log_ratio)
    trivial = int(np.sign(log_ratio)) if floored == 0 else 0
    return floored, trivial


def adapt_basis_update(
    n_ei: int,
    est_rb: float,
    est_ei: float,
    tol_rb: float,
    tol_ei: float,
    rank_v: int,
    shrink_cap: int = 3,
) -> BasisUpdate:
    """
    Next basis sizes from the split error estimate.

    p = ⌊log10(Δ̄_RB/tol_RB)⌋ and d = ⌊log10(Δ̄_I/tol_EI)⌋; when a floor is 0,
    p₀ (d₀) carries the sign of the unfloored logarithm so at least one
    vector moves. ℓ_RB_next = p₀ + p is a per-iteration increment,
    ℓ_EI_next = ℓ_EI + d₀ + d is a total. Neither shrinks by more than
    shrink_cap, and ℓ_EI_next is raised to exceed rank_v + max(ℓ_RB_next, 0).

    Args:
        n_ei: Current interpolation size
        est_rb: Δ̄_RB at μ*
        est_ei: Δ̄_I at μ*
        tol_rb: RB tolerance
        tol_ei: Interpolation tolerance
        rank_v: Current rank of V
        shrink_cap: Largest removal per iteration

    Returns:
        BasisUpdate
    """
    if not (tol_rb > 0 and tol_ei > 0):
        raise InvalidInputError("tolerances must be positive")
    p, p0 = _split(_log_ratio(est_rb, tol_rb))
    d, d0 = _split(_log_ratio(est_ei, tol_ei))
    rb_next = max(p0 + p, -shrink_cap)
    ei_next = n_ei + max(d0 + d, -shrink_cap)
    ei_next = max(ei_next, rank_v + max(rb_next, 0) + 1)
    return BasisUpdate(p=p, d=d, p0=p0, d0=d0, rb_next=rb_next, ei_next=ei_next)


# ---------------------------------------------------------------------------
# Shared machinery
# ---------------------------------------------------------------------------


class _DirectInfSup:
    """σ_min(Ẽ(μ)) computed on demand and memoised per μ."""

    def __init__(self, fom: SemiImplicitFom):
        self.fom = fom
        self._cache: dict[tuple[float, ...] | None, float] = {}
        self._lock = threading.Lock()

    def __call__(self, mu: ParameterPoint | None) -> float:
        key = mu.coords if mu is not None else None
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = smallest_singular_value(self.fom.E(mu))
        with self._lock:
            self._cache[key] = value
        return value


class _Engine:
    """FOM cache, inf-sup source, dual source and sweeps for one run."""

    def __init__(
        self,
        fom: SemiImplicitFom,
        training: TrainingSet,
        cfg: GreedyConfig,
        state: GreedyState,
        surrogate: InfSupSurrogate | None = None,
    ):
        errors = cfg.validate()
        if errors:
            raise InvalidInputError("; ".join(errors))
        self.fom = fom
        self.training = training
        self.cfg = cfg
        self.state = state
        self.timer = PhaseTimer()
        self._trajectories: dict[tuple[float, ...] | None, Trajectory] = {}
        self.last_fom_mu: ParameterPoint | None = None
        self.dual_strategy = self._resolve_dual_strategy()
        self._dual_state: DualBasisState | None = None
        self._fixed_dual: FixedDual | None = None

        with self.timer.phase("infsup"):
            if not fom.is_E_parametric:
                sigma = smallest_singular_value(fom.E(training[0]))
                self.inf_sup = lambda mu: sigma
            elif cfg.infsup == SURROGATE:
                if surrogate is None:
                    surrogate = build_surrogate(training, fom.E, seed=cfg.seed or 0, jobs=cfg.jobs)
                state.surrogate = surrogate
                self.inf_sup = state.surrogate
            else:
                self.inf_sup = _DirectInfSup(fom)

    def _resolve_dual_strategy(self) -> str:
        strategy = self.cfg.dual_strategy
        if strategy == AUTO:
            return REDUCED_BASIS if self.fom.is_E_parametric else KRYLOV
        if strategy == KRYLOV and self.fom.is_E_parametric:
            raise InvalidInputError(f"{self.fom.name}: Ẽ depends on μ, Krylov dual needs a constant Ẽ")
        return strategy

    def initial_mu(self) -> ParameterPoint:
        if self.cfg.seed is None:
            return self.training[0]
        rng = np.random.default_rng(self.cfg.seed)
        return self.training[int(rng.integers(len(self.training)))]

    def trajectory(self, mu: ParameterPoint | None) -> Trajectory:
        """FOM trajectory at μ, simulated once per distinct μ."""
        key = mu.coords if mu is not None else None
        if key not in self._trajectories:
            with self.timer.phase("fom"):
                self._trajectories[key] = simulate_fom(self.fom, mu)
            self.state.fom_solves += 1
        self.last_fom_mu = mu
        return self._trajectories[key]

    def has_trajectory(self, mu: ParameterPoint | None) -> bool:
        return (mu.coords if mu is not None else None) in self._trajectories

    def snapshots(self, trajectory: Trajectory) -> tuple[np.ndarray, np.ndarray]:
        """State and nonlinear snapshots, thinned by AdSS when configured."""
        X, F = trajectory.states, trajectory.nonlinear_snapshots
        if self.cfg.adss_tol is None:
            return X, F
        _, X_kept = adss_filter(X, self.cfg.adss_tol)
        _, F_kept = adss_filter(F, self.cfg.adss_tol)
        return (X_kept if X_kept.shape[1] else X), (F_kept if F_kept.shape[1] else F)

    def dual(self, basis: ReducedBasis):
        with self.timer.phase("dual"):
            if self.dual_strategy == KRYLOV:
                if self._fixed_dual is None:
                    self._fixed_dual = FixedDual(
                        dual_solve_nonparametric(
                            self.fom, tol=self.cfg.gmres_tol, drop_tol=self.cfg.ilu_drop_tol
                        )
                    )
                return self._fixed_dual
            if self.dual_strategy == PRIMAL_BASIS:
                provider = primal_basis_dual(self.fom, basis.V)
                self.state.dual_basis = basis.V
                return provider
            if self._dual_state is None:
                self._dual_state = DualBasisState.initial(self.fom, self.training[0])
            self._dual_state = update_v_du(
                self._dual_state, self.training, tol=self.cfg.dual_tol, jobs=self.cfg.jobs
            )
            self.state.dual_basis = self._dual_state.dual.W
            return self._dual_state.dual

    def estimator(self, basis: ReducedBasis, fine: InterpBasis | None) -> OutputErrorEstimator:
        estimator = OutputErrorEstimator(
            fom=self.fom,
            dual=self.dual(basis),
            inf_sup=self.inf_sup,
            mode=self.cfg.indicator,
            fine=fine,
            dt_weighted_interp=self.cfg.dt_weighted_interp,
        )
        self.state.estimator = estimator
        return estimator

    def rho(self, rom: ReducedModel, estimator: OutputErrorEstimator) -> tuple[float, Evaluation | None]:
        """ρ̄ at the most recent parameter with FOM data; keeps the last value if unusable."""
        mu = self.last_fom_mu
        if mu is None and self.fom.domain.dim:
            return self.state.rho_bar, None
        evaluation = estimator.evaluate(rom, mu, self.state.rho_bar)
        if evaluation.residuals is None:
            return self.state.rho_bar, evaluation
        reference = self.trajectory(mu)
        try:
            value = rho_bar(
                self.fom,
                mu,
                reference.states,
                evaluation.trajectory.lift(rom.V),
                evaluation.residuals,
            )
        except DegenerateRhoError as e:
            ui.show_debug(f"{e}; using ρ̄ = 1")
            value = 1.0
        self.state.rho_bar = value
        return value, evaluation

    def sweep(self, rom: ReducedModel, estimator: OutputErrorEstimator, rho: float) -> list[ErrorReport]:
        with self.timer.phase("sweep"):
            return map_ordered(lambda mu: estimator.estimate(rom, mu, rho), list(self.training), self.cfg.jobs)

    def reference_report(
        self, evaluation: Evaluation | None, estimator: OutputErrorEstimator, rho: float
    ) -> ErrorReport | None:
        """Report at the last FOM parameter, rescaled to ρ̄ and compared to the FOM."""
        if evaluation is None:
            return None
        mu = self.last_fom_mu
        if evaluation.residuals is None:
            report = evaluation.report
        else:
            report = output_indicator(
                estimator.mode,
                mu,
                evaluation.residuals,
                estimator.dual.at(mu),
                rho,
                estimator.inf_sup(mu),
                evaluation.trajectory.snapshot_outputs,
            )
        return report.with_truth(self.trajectory(mu))

    def record(
        self,
        iteration: int,
        mu: ParameterPoint | None,
        rb_increment: int,
        reference: ErrorReport | None,
        est_max: float,
        started: float,
    ) -> IterationRecord:
        nan = float("nan")
        record = IterationRecord(
            iteration=iteration,
            mu=mu.coords if mu is not None else None,
            n_rb=self.state.n_rb,
            n_ei=self.state.n_ei,
            rb_increment=rb_increment,
            est_rb=reference.est_rb if reference else nan,
            est_ei=reference.est_ei if reference else nan,
            est_total=reference.est_total if reference else nan,
            est_max=est_max,
            true_error=reference.true_error if reference else None,
            rho_bar=self.state.rho_bar,
            eff_original=reference.effectivity_original if reference else None,
            eff_modified=reference.effectivity_modified if reference else None,
            wall_time=time.perf_counter() - started,
        )
        self.state.records.append(record)
        ui.show_iteration(record)
        return record

    def finish(self, termination: str) -> GreedyState:
        self.state.termination = termination
        self.state.timings = dict(self.timer.timings)
        return self.state


def _deflated_modes(basis: ReducedBasis, X: np.ndarray, count: int, mu) -> ReducedBasis:
    """Append count POD modes of the snapshots deflated against span(V)."""
    deflated = basis.project(X) if basis.rank else X
    if not np.any(deflated):
        return basis
    modes = pod(deflated, count=count)
    return basis.extend(modes.V, mu.coords if mu is not None else None)


def _stagnated(state: GreedyState, window: int, tol: float) -> bool:
    """Same μ* over window+1 iterations without the estimate going down."""
    if len(state.selected) <= window:
        return False
    recent = state.selected[-(window + 1) :]
    if any(mu != recent[0] for mu in recent):
        return False
    estimates = [r.est_max for r in state.records[-(window + 1) :]]
    return estimates[-1] > tol and not estimates[-1] < estimates[0]


# ---------------------------------------------------------------------------
# Standard POD-Greedy
# ---------------------------------------------------------------------------


def _standard_loop(
    engine: _Engine,
    interp: InterpBasis | None,
    fine: InterpBasis | None,
) -> GreedyState:
    state, cfg, fom = engine.state, engine.cfg, engine.fom
    state.interp, state.fine = interp, fine
    mu_star = engine.initial_mu()
    for iteration in range(1, cfg.max_iter + 1):
        started = time.perf_counter()
        state.selected.append(mu_star)
        trajectory = engine.trajectory(mu_star)
        with engine.timer.phase("basis"):
            grown = _deflated_modes(state.basis, engine.snapshots(trajectory)[0], 1, mu_star)
        if grown.rank == state.basis.rank:
            ui.show_warning(f"iteration {iteration}: snapshots at μ* already in span(V)")
            return engine.finish(STAGNATION)
        state.basis = grown

        rom = project_rom(fom, state.basis, interp)
        estimator = engine.estimator(state.basis, fine)
        rho, evaluation = engine.rho(rom, estimator)
        reports = engine.sweep(rom, estimator, rho)
        totals = np.array([r.est_total for r in reports])
        winner = argmax_first(totals)
        engine.record(
            iteration,
            mu_star,
            1,
            engine.reference_report(evaluation, estimator, rho),
            float(totals[winner]),
            started,
        )
        if totals[winner] <= cfg.tol:
            return engine.finish(TOL)
        mu_star = engine.training[winner]
    return engine.finish(MAX_ITER)


def pod_greedy_standard(
    fom: SemiImplicitFom,
    training: TrainingSet,
    cfg: GreedyConfig,
    surrogate: InfSupSurrogate | None = None,
) -> GreedyState:
    """
    Standard POD-Greedy with the exactly projected nonlinear term.

    Each iteration runs the FOM at μ*, appends the leading POD mode of the
    snapshots deflated against span(V) and picks the next μ* as the argmax
    of the indicator over the training set, until that maximum is ≤ tol.

    Args:
        fom: Full-order model
        training: Training set Ξ
        cfg: Greedy settings
        surrogate: Prebuilt σ_min surrogate for a parametric Ẽ (built here when None)

    Returns:
        GreedyState with termination "tol", "max_iter" or "stagnation"
    """
    state = GreedyState("standard", ReducedBasis.empty(fom.size))
    engine = _Engine(fom, training, cfg, state, surrogate)
    return _standard_loop(engine, None, None)


def pod_greedy_deim_standard(
    fom: SemiImplicitFom,
    training: TrainingSet,
    cfg: GreedyConfig,
    surrogate: InfSupSurrogate | None = None,
) -> GreedyState:
    """
    Standard POD-Greedy-(D)EIM.

    The FOM is run at every training point first; the interpolation basis is
    built once from all their nonlinear snapshots (EIM stopped at eps_ei,
    DEIM truncated by the eps_ei energy rule). POD-Greedy then runs on the
    interpolated ROM, reusing the stored trajectories.

    Args:
        fom: Full-order model
        training: Training set Ξ
        cfg: Greedy settings

    Returns:
        GreedyState
    """
    state = GreedyState("standard-deim", ReducedBasis.empty(fom.size))
    engine = _Engine(fom, training, cfg, state, surrogate)
    pool = NonlinearSnapshotPool()
    for mu in training:
        pool = pool.append(engine.snapshots(engine.trajectory(mu))[1], mu.coords)
    state.pool = pool
    with engine.timer.phase("interpolation"):
        if cfg.method == EIM:
            interp = eim_build(pool, max_iter=pool.n_columns, eps=cfg.eps_ei)
        else:
            interp = deim_build(pool, energy=cfg.eps_ei)
        fine = finer_basis(pool, interp, cfg.fine_margin)
    ui.show_info(f"interpolation basis: {interp.size} {cfg.method} vectors from {len(training)} FOM runs")
    return _standard_loop(engine, interp, fine)


# ---------------------------------------------------------------------------
# Adaptive POD-Greedy-(D)EIM
# ---------------------------------------------------------------------------


def adaptive_pod_greedy_deim(
    fom: SemiImplicitFom,
    training: TrainingSet,
    cfg: GreedyConfig,
    surrogate: InfSupSurrogate | None = None,
) -> GreedyState:
    """
    Adaptive POD-Greedy-(D)EIM.

    Per iteration: a negative RB increment removes that many newest columns
    of V, otherwise the FOM runs at μ* (once per distinct μ*) and the given
    number of deflated POD modes is appended. The interpolation basis is
    rebuilt at its target size from the pooled nonlinear snapshots of every
    selected μ*, the dual is updated, ρ̄ is taken at the latest FOM parameter
    and the indicator is swept over Ξ. The split estimate at the new μ*
    drives the next sizes through adapt_basis_update.

    Args:
        fom: Full-order model
        training: Training set Ξ
        cfg: Greedy settings

    Returns:
        GreedyState with termination "zoa", "floor", "max_iter" or "stagnation"
    """
    state = GreedyState("adaptive-greedy", ReducedBasis.empty(fom.size))
    engine = _Engine(fom, training, cfg, state, surrogate)
    eps_star = cfg.eps_star
    mu_star = engine.initial_mu()
    rb_increment, n_ei = cfg.initial_rb, cfg.initial_ei
    pooled: set[tuple[float, ...]] = set()

    for iteration in range(1, cfg.max_iter + 1):
        started = time.perf_counter()
        state.selected.append(mu_star)

        with engine.timer.phase("basis"):
            if rb_increment < 0:
                drop = min(-rb_increment, state.basis.rank - 1)
                state.basis = state.basis.drop_last(drop)
            else:
                trajectory = engine.trajectory(mu_star)
                X, F = engine.snapshots(trajectory)
                if rb_increment > 0:
                    state.basis = _deflated_modes(state.basis, X, rb_increment, mu_star)
                if state.basis.rank == 0:
                    raise InvalidInputError(f"FOM snapshots at {mu_star.coords} are all zero")
                if mu_star.coords not in pooled:
                    state.pool = state.pool.append(F, mu_star.coords)
                    pooled.add(mu_star.coords)

        with engine.timer.phase("interpolation"):
            state.interp, state.fine = build_interp_pair(
                state.pool, n_ei, cfg.method, cfg.eps_ei, cfg.fine_margin
            )

        rom = project_rom(fom, state.basis, state.interp)
        estimator = engine.estimator(state.basis, state.fine)
        rho, evaluation = engine.rho(rom, estimator)
        reports = engine.sweep(rom, estimator, rho)
        totals = np.array([r.est_total for r in reports])
        winner = argmax_first(totals)
        worst = reports[winner]
        est_max = float(totals[winner])

        engine.record(
            iteration,
            mu_star,
            rb_increment,
            engine.reference_report(evaluation, estimator, rho),
            est_max,
            started,
        )

        if eps_star <= est_max <= cfg.tol:
            return engine.finish(ZOA)
        if est_max < eps_star and state.n_rb <= 1 and n_ei <= state.n_rb + 1:
            return engine.finish(FLOOR)
        if _stagnated(state, cfg.stagnation_window, cfg.tol):
            return engine.finish(STAGNATION)

        update = adapt_basis_update(
            n_ei,
            worst.est_rb,
            worst.est_ei,
            cfg.tol,
            cfg.ei_tolerance,
            state.n_rb,
            cfg.shrink_cap,
        )
        state.updates.append(update)
        rb_increment, n_ei = update.rb_next, update.ei_next
        mu_star = training[winner]

    return engine.finish(MAX_ITER)


# ---------------------------------------------------------------------------
# Two-way adaptation for non-parametric models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LandscapeRecord:
    """Estimate and true error of one (ℓ_RB, ℓ_EI) combination."""

    n_rb: int
    n_ei: int
    estimate: float
    true_error: float
    stable: bool


class _FixedBases:
    """Truncations of conservatively large bases for a non-parametric model."""

    def __init__(
        self,
        fom: SemiImplicitFom,
        reference: Trajectory,
        V_full: ReducedBasis,
        interp_full: InterpBasis,
        cfg: GreedyConfig,
    ):
        if fom.domain.dim:
            raise InvalidInputError("two-way adaptation needs a non-parametric model")
        self.fom = fom
        self.reference = reference
        self.V_full = V_full
        self.interp_full = interp_full
        self.cfg = cfg
        self.mu = reference.mu
        sigma = smallest_singular_value(fom.E(self.mu))
        self.dual = FixedDual(
            dual_solve_nonparametric(fom, tol=cfg.gmres_tol, drop_tol=cfg.ilu_drop_tol)
        )
        self.inf_sup = lambda mu: sigma

    def clamp(self, n_rb: int, n_ei: int) -> tuple[int, int]:
        return (
            max(1, min(n_rb, self.V_full.rank)),
            max(1, min(n_ei, self.interp_full.size)),
        )

    def evaluate(self, n_rb: int, n_ei: int) -> tuple[ReducedModel, ErrorReport, float]:
        """ROM of the given sizes with its report (ρ̄ from the reference) and ρ̄."""
        basis = self.V_full.truncate(n_rb)
        interp = self.interp_full.truncate(n_ei)
        n_fine = min(n_ei + self.cfg.fine_margin, self.interp_full.size)
        fine = self.interp_full.truncate(n_fine) if n_fine > n_ei else None
        rom = project_rom(self.fom, basis, interp)
        estimator = OutputErrorEstimator(
            self.fom, self.dual, self.inf_sup, self.cfg.indicator, fine, self.cfg.dt_weighted_interp
        )
        evaluation = estimator.evaluate(rom, self.mu)
        if evaluation.residuals is None:
            return rom, evaluation.report.with_truth(self.reference), float("nan")
        try:
            rho = rho_bar(
                self.fom,
                self.mu,
                self.reference.states,
                evaluation.trajectory.lift(rom.V),
                evaluation.residuals,
            )
        except DegenerateRhoError:
            rho = 1.0
        report = output_indicator(
            self.cfg.indicator,
            self.mu,
            evaluation.residuals,
            self.dual.at(self.mu),
            rho,
            self.inf_sup(self.mu),
            evaluation.trajectory.snapshot_outputs,
        )
        return rom, report.with_truth(self.reference), rho


def adaptive_pod_deim_twoway(
    fom: SemiImplicitFom,
    reference: Trajectory,
    V_full: ReducedBasis,
    interp_full: InterpBasis,
    cfg: GreedyConfig,
) -> GreedyState:
    """
    Two-way adaptation of (ℓ_RB, ℓ_EI) on precomputed bases.

    Starting from cfg.initial_rb / cfg.initial_ei, each iteration truncates
    both bases, estimates the error of the resulting ROM and moves both
    counts by the adaptation rule (the RB increment is added to the current
    count). Counts are clamped to the available columns, and ℓ_EI is kept
    above ℓ_RB. Revisiting a pair of counts ends the run with "stagnation".

    Args:
        fom: Non-parametric model
        reference: FOM trajectory the bases were built from
        V_full: Conservatively large reduced basis
        interp_full: Conservatively large interpolation basis
        cfg: Settings (tol, tolerances, initial counts, shrink cap)

    Returns:
        GreedyState with the final truncated bases
    """
    errors = cfg.validate()
    if errors:
        raise InvalidInputError("; ".join(errors))
    bases = _FixedBases(fom, reference, V_full, interp_full, cfg)
    state = GreedyState("twoway", V_full, interp_full, fom_solves=0)
    state.selected = []
    timer = PhaseTimer()
    n_rb, n_ei = bases.clamp(cfg.initial_rb, cfg.initial_ei)
    visited: set[tuple[int, int]] = set()

    for iteration in range(1, cfg.max_iter + 1):
        started = time.perf_counter()
        n_rb, n_ei = bases.clamp(n_rb, n_ei)
        if (n_rb, n_ei) in visited:
            ui.show_warning(f"two-way adaptation revisited (ℓ_RB, ℓ_EI) = ({n_rb}, {n_ei})")
            state.termination = STAGNATION
            break
        visited.add((n_rb, n_ei))

        with timer.phase("sweep"):
            rom, report, rho = bases.evaluate(n_rb, n_ei)
        state.basis, state.interp = rom.basis, rom.interp
        state.selected.append(reference.mu)
        if math.isfinite(rho):
            state.rho_bar = rho
        total = report.est_total
        record = IterationRecord(
            iteration=iteration,
            mu=None,
            n_rb=n_rb,
            n_ei=n_ei,
            rb_increment=state.updates[-1].rb_next if state.updates else 0,
            est_rb=report.est_rb,
            est_ei=report.est_ei,
            est_total=total,
            est_max=total,
            true_error=report.true_error,
            rho_bar=state.rho_bar,
            eff_original=report.effectivity_original,
            eff_modified=report.effectivity_modified,
            wall_time=time.perf_counter() - started,
        )
        state.records.append(record)
        ui.show_iteration(record)

        if cfg.eps_star <= total <= cfg.tol:
            state.termination = ZOA
            break
        if total < cfg.eps_star and n_rb <= 1 and n_ei <= n_rb + 1:
            state.termination = FLOOR
            break

        update = adapt_basis_update(
            n_ei, report.est_rb, report.est_ei, cfg.tol, cfg.ei_tolerance, n_rb, cfg.shrink_cap
        )
        state.updates.append(update)
        n_rb, n_ei = n_rb + update.rb_next, update.ei_next
    else:
        state.termination = MAX_ITER

    state.timings = dict(timer.timings)
    return state


def twoway_bases(
    fom: SemiImplicitFom, cfg: GreedyConfig, mu: ParameterPoint | None = None
) -> tuple[Trajectory, ReducedBasis, InterpBasis]:
    """
    Reference trajectory and the conservatively large bases for two-way runs.

    V comes from POD with eps_pod; the interpolation basis from EIM stopped
    at eps_ei or DEIM truncated by the eps_ei energy rule.
    """
    reference = simulate_fom(fom, mu)
    X, F = reference.states, reference.nonlinear_snapshots
    if cfg.adss_tol is not None:
        X = adss_filter(X, cfg.adss_tol)[1] if np.any(X) else X
        F = adss_filter(F, cfg.adss_tol)[1] if np.any(F) else F
    basis = pod(X, energy=cfg.eps_pod, mu=mu.coords if mu is not None else None)
    if cfg.method == EIM:
        interp = eim_build(F, max_iter=F.shape[1], eps=cfg.eps_ei)
    else:
        interp = deim_build(F, energy=cfg.eps_ei)
    return reference, basis, interp


def error_landscape(
    fom: SemiImplicitFom,
    reference: Trajectory,
    V_full: ReducedBasis,
    interp_full: InterpBasis,
    rb_counts: list[int],
    ei_counts: list[int],
    cfg: GreedyConfig,
) -> list[LandscapeRecord]:
    """
    Estimate and true error over a grid of (ℓ_RB, ℓ_EI).

    Unstable combinations get +∞ for both values.
    """
    bases = _FixedBases(fom, reference, V_full, interp_full, cfg)
    pairs = [(r, e) for r in rb_counts for e in ei_counts]

    def _point(pair: tuple[int, int]) -> LandscapeRecord:
        n_rb, n_ei = bases.clamp(*pair)
        _, report, _ = bases.evaluate(n_rb, n_ei)
        true = report.true_error if report.true_error is not None else float("inf")
        return LandscapeRecord(n_rb, n_ei, report.est_total, true, report.stable)

    return map_ordered(_point, pairs, cfg.jobs)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationRecord:
    """Both indicators against the true error at one validation parameter."""

    mu: tuple[float, ...] | None
    est_original: float
    est_modified: float
    true_original: float
    true_modified: float

    @property
    def eff_original(self) -> float | None:
        return self.est_original / self.true_original if self.true_original > 0 else None

    @property
    def eff_modified(self) -> float | None:
        return self.est_modified / self.true_modified if self.true_modified > 0 else None


def validation_points(training: TrainingSet, state: GreedyState, count: int, seed: int | None) -> list[ParameterPoint]:
    """Up to count training points not selected as μ*, spread evenly or drawn by seed."""
    selected = {mu.coords for mu in state.selected if mu is not None}
    candidates = [mu for mu in training if mu.coords not in selected]
    if len(candidates) <= count:
        return candidates
    if seed is None:
        picks = np.linspace(0, len(candidates) - 1, count).round().astype(int)
    else:
        picks = np.sort(np.random.default_rng(seed).choice(len(candidates), count, replace=False))
    return [candidates[i] for i in picks]


def validate_rom(
    fom: SemiImplicitFom,
    state: GreedyState,
    points: list[ParameterPoint],
    jobs: int = 1,
) -> list[ValidationRecord]:
    """
    Both indicators and the true output errors at validation parameters.

    Runs the FOM at every point. A point where the estimate falls below the
    true error is reported as a warning.

    Args:
        fom: Full-order model
        state: Finished greedy run (its final estimator is reused)
        points: Validation parameters, normally disjoint from the selected μ*
        jobs: Workers

    Returns:
        One ValidationRecord per point
    """
    if state.estimator is None:
        raise InvalidInputError("greedy run has no estimator to validate")
    rom = state.rom(fom)
    estimator = state.estimator

    def _check(mu: ParameterPoint) -> ValidationRecord:
        report = estimator.estimate(rom, mu, state.rho_bar).with_truth(simulate_fom(fom, mu))
        return ValidationRecord(
            mu=mu.coords if mu is not None else None,
            est_original=report.total_original,
            est_modified=report.total_modified,
            true_original=report.true_error_original,
            true_modified=report.true_error_modified,
        )

    records = map_ordered(_check, points, jobs)
    for r in records:
        if r.est_modified < r.true_modified:
            ui.show_warning(
                f"indicator below true error at μ = {r.mu}: "
                f"{r.est_modified:.3e} < {r.true_modified:.3e}"
            )
    return records
