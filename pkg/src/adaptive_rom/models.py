"""Full-order models in semi-implicit discrete form.

Every model advances

    Ẽ(μ) x^{k+1} = Ã(μ) x^k + Δt f(x^k, μ) + Δt B u^k,    y^{k+1} = C x^{k+1}

with constant Δt. Three benchmarks are assembled here:

burgers
    1-D viscous Burgers' equation on [0, 1], N interior-plus-right nodes
    σ_j = j/N. Left boundary w(0) = 0 (Dirichlet, not a state entry), right
    boundary ∂w/∂σ(1) = 0 through a ghost node mirrored to σ_{N-1}. Central
    differences for diffusion (L) and convection (D), diffusion implicit,
    convection explicit: Ẽ(μ) = I − Δt μ L, Ã = I, f(x) = −x∘(Dx). Source
    s ≡ 1 on every node, output y = w(1, t).

chromatography
    Two-component batch chromatography column with a bi-Langmuir isotherm.
    State [c_a, c_b, q_a, q_b] on n = N/4 finite-volume cells of the
    dimensionless column [0, 1]. Convection uses the Lax-Friedrichs flux with
    dissipation coefficient 1 (which reduces to upwinding for unit velocity),
    axial dispersion is centred; both are implicit and parameter-free, so Ẽ
    is block tridiagonal and constant. The mass transfer terms
    h_z = (L ε A_c / Q) κ_z (q_z^eq − q_z) form the explicit nonlinearity.
    The inlet flux is the feed χ(t) = 1 for t ≤ t_in and 0 afterwards.
    Parameters μ = (Q, t_in); horizon T(Q) = horizon_factor / Q; outputs are
    both concentrations at the outlet cell.

synthetic-rd
    Non-parametric 1-D reaction-diffusion x_t = x_σσ + x − x³ + s on (0, 1)
    with homogeneous Dirichlet boundaries, N interior nodes, constant source s
    (default 10) and output at node N//2.
"""

from __future__ import annotations

import itertools
import math
import numbers
from abc import ABC, abstractmethod
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, field, fields
from typing import TYPE_CHECKING, Any

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spsla

from .errors import InvalidInputError, NumericFailureError
from .linalg import smallest_singular_value

if TYPE_CHECKING:
    from .config import ModelConfig

MODEL_IDS = ("burgers", "chromatography", "synthetic-rd")


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterDomain:
    """Axis-aligned box of admissible parameters. A 0-dimensional box is non-parametric."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) != len(self.upper):
            raise InvalidInputError("parameter domain bounds have different lengths")
        for lo, hi in zip(self.lower, self.upper, strict=True):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise InvalidInputError(f"invalid parameter interval [{lo}, {hi}]")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"mu{i}" for i in range(len(self.lower))))

    @classmethod
    def empty(cls) -> ParameterDomain:
        return cls((), ())

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, coords: Sequence[float]) -> bool:
        if len(coords) != self.dim:
            return False
        for c, lo, hi in zip(coords, self.lower, self.upper, strict=True):
            slack = 1e-12 * max(1.0, abs(lo), abs(hi))
            if not lo - slack <= c <= hi + slack:
                return False
        return True

    def point(self, *coords: float) -> ParameterPoint:
        return ParameterPoint(tuple(coords), self)

    def center(self) -> tuple[float, ...]:
        return tuple(0.5 * (lo + hi) for lo, hi in zip(self.lower, self.upper, strict=True))

    def corners(self) -> list[tuple[float, ...]]:
        return [tuple(c) for c in itertools.product(*zip(self.lower, self.upper, strict=True))]


@dataclass(frozen=True)
class ParameterPoint:
    """A parameter vector inside its domain."""

    coords: tuple[float, ...]
    domain: ParameterDomain = field(compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))
        if not self.domain.contains(self.coords):
            raise InvalidInputError(
                f"parameter {self.coords} outside domain "
                f"{list(zip(self.domain.lower, self.domain.upper, strict=True))}"
            )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def __getitem__(self, i: int) -> float:
        return self.coords[i]


@dataclass(frozen=True)
class TrainingSet:
    """Ordered training parameters sharing a common domain."""

    points: tuple[ParameterPoint, ...]
    sampling: str = "explicit"
    counts: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.points:
            raise InvalidInputError("training set must not be empty")
        domain = self.points[0].domain
        if any(p.domain != domain for p in self.points):
            raise InvalidInputError("training points live in different domains")

    @property
    def domain(self) -> ParameterDomain:
        return self.points[0].domain

    @property
    def log_axes(self) -> tuple[bool, ...]:
        return tuple(self.sampling == "log-uniform" for _ in range(self.domain.dim))

    @classmethod
    def uniform(cls, domain: ParameterDomain, counts: Sequence[int]) -> TrainingSet:
        """Tensor grid of equispaced points; the first axis varies slowest."""
        axes = [
            np.linspace(lo, hi, n) if n > 1 else np.array([0.5 * (lo + hi)])
            for lo, hi, n in _axis_specs(domain, counts)
        ]
        return cls._from_axes(domain, axes, "uniform", counts)

    @classmethod
    def log_uniform(cls, domain: ParameterDomain, counts: Sequence[int]) -> TrainingSet:
        """Tensor grid of logarithmically spaced points (positive bounds only)."""
        if any(lo <= 0 for lo in domain.lower):
            raise InvalidInputError("log-uniform sampling needs strictly positive lower bounds")
        axes = [
            np.geomspace(lo, hi, n) if n > 1 else np.array([math.sqrt(lo * hi)])
            for lo, hi, n in _axis_specs(domain, counts)
        ]
        return cls._from_axes(domain, axes, "log-uniform", counts)

    @classmethod
    def explicit(cls, domain: ParameterDomain, coords: Sequence[Sequence[float]]) -> TrainingSet:
        return cls(tuple(ParameterPoint(tuple(c), domain) for c in coords), "explicit", ())

    @classmethod
    def _from_axes(cls, domain, axes, sampling, counts) -> TrainingSet:
        if domain.dim == 0:
            return cls((ParameterPoint((), domain),), sampling, ())
        # Clip geomspace/linspace round-off back onto the box
        axes = [np.clip(a, lo, hi) for a, lo, hi in zip(axes, domain.lower, domain.upper, strict=True)]
        points = tuple(ParameterPoint(tuple(c), domain) for c in itertools.product(*axes))
        return cls(points, sampling, tuple(int(n) for n in counts))

    def as_array(self) -> np.ndarray:
        return np.array([p.coords for p in self.points], dtype=float).reshape(len(self), -1)

    def index_of(self, point: ParameterPoint) -> int:
        return self.points.index(point)

    def subset(self, indices: Sequence[int]) -> TrainingSet:
        return TrainingSet(tuple(self.points[i] for i in indices), "explicit", ())

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[ParameterPoint]:
        return iter(self.points)

    def __getitem__(self, i: int) -> ParameterPoint:
        return self.points[i]


def _axis_specs(domain: ParameterDomain, counts: Sequence[int]):
    if len(counts) != domain.dim:
        raise InvalidInputError(f"need {domain.dim} per-axis counts, got {len(counts)}")
    if any(int(n) < 1 for n in counts):
        raise InvalidInputError(f"per-axis counts must be positive, got {list(counts)}")
    return zip(domain.lower, domain.upper, (int(n) for n in counts), strict=True)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

Coefficient = Callable[[np.ndarray], float]


def _one(_coords: np.ndarray) -> float:
    return 1.0


@dataclass(frozen=True)
class ProjectedOperator:
    """Dense reduced counterpart of an AffineOperator."""

    matrices: tuple[np.ndarray, ...]
    coefficients: tuple[Coefficient, ...]

    def assemble(self, mu: ParameterPoint | None) -> np.ndarray:
        coords = mu.as_array() if mu is not None else np.empty(0)
        out = np.zeros_like(self.matrices[0])
        for theta, M in zip(self.coefficients, self.matrices, strict=True):
            out += theta(coords) * M
        return out


@dataclass(frozen=True)
class AffineOperator:
    """Sparse operator Σ_q θ_q(μ) M_q with parameter-independent M_q."""

    matrices: tuple[sp.csr_matrix, ...]
    coefficients: tuple[Coefficient, ...]
    parametric: bool = False

    @classmethod
    def constant(cls, M) -> AffineOperator:
        return cls((sp.csr_matrix(M, dtype=float),), (_one,), False)

    @classmethod
    def affine(cls, terms: Sequence[tuple[Coefficient, Any]]) -> AffineOperator:
        return cls(
            tuple(sp.csr_matrix(M, dtype=float) for _, M in terms),
            tuple(theta for theta, _ in terms),
            True,
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrices[0].shape

    def assemble(self, mu: ParameterPoint | None) -> sp.csr_matrix:
        coords = mu.as_array() if mu is not None else np.empty(0)
        out = sp.csr_matrix(self.shape, dtype=float)
        for theta, M in zip(self.coefficients, self.matrices, strict=True):
            out = out + theta(coords) * M
        return out.tocsr()

    def project(self, V: np.ndarray) -> ProjectedOperator:
        """Galerkin projection Vᵀ M_q V of every term."""
        return ProjectedOperator(
            tuple(np.asarray(V.T @ (M @ V)) for M in self.matrices), self.coefficients
        )


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RestrictedNonlinearity:
    """
    Evaluator of selected components of f.

    closure lists the state entries the selected components depend on;
    the evaluator takes the state on that closure (one column per state) and
    returns f at the selected indices.
    """

    indices: np.ndarray
    closure: np.ndarray
    evaluate_local: Callable[[np.ndarray, ParameterPoint | None], np.ndarray]

    def __call__(self, x_closure: np.ndarray, mu: ParameterPoint | None) -> np.ndarray:
        return self.evaluate_local(x_closure, mu)


def _as_indices(indices: Sequence[int], size: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.intp).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        raise InvalidInputError(f"indices out of range [0, {size})")
    return idx


class Nonlinearity(ABC):
    """Nonlinear term f(x, μ) acting on states stored column-wise."""

    size: int

    @abstractmethod
    def evaluate(self, x: np.ndarray, mu: ParameterPoint | None) -> np.ndarray:
        """Evaluate f on one state (N,) or several states (N, K)."""

    @abstractmethod
    def restrict(self, indices: Sequence[int]) -> RestrictedNonlinearity:
        """Build an evaluator for the components listed in indices."""


class PointwiseNonlinearity(Nonlinearity):
    """f_i(x) = g(x_i) for an elementwise g."""

    def __init__(self, size: int, g: Callable[[np.ndarray], np.ndarray]):
        self.size = size
        self.g = g

    def evaluate(self, x, mu):
        return self.g(np.asarray(x, dtype=float))

    def restrict(self, indices):
        idx = _as_indices(indices, self.size)
        closure = np.unique(idx)
        pos = np.searchsorted(closure, idx)
        g = self.g
        return RestrictedNonlinearity(idx, closure, lambda xc, mu: g(np.asarray(xc)[pos]))


class ConvectionNonlinearity(Nonlinearity):
    """f(x) = −x ∘ (D x) for a sparse first-difference operator D."""

    def __init__(self, D: sp.csr_matrix):
        self.D = sp.csr_matrix(D, dtype=float)
        self.size = self.D.shape[0]

    def evaluate(self, x, mu):
        x = np.asarray(x, dtype=float)
        return -x * (self.D @ x)

    def restrict(self, indices):
        idx = _as_indices(indices, self.size)
        rows = self.D[idx]
        closure = np.union1d(idx, rows.indices)
        pos = np.searchsorted(closure, idx)
        local = sp.csr_matrix(rows[:, closure])

        def _local(xc, mu):
            xc = np.asarray(xc, dtype=float)
            return -xc[pos] * (local @ xc)

        return RestrictedNonlinearity(idx, closure, _local)


@dataclass(frozen=True)
class ChromatographyCoefficients:
    """Physical constants of the batch chromatography column."""

    porosity: float = 0.4
    peclet: float = 2000.0
    column_length: float = 25.0
    column_area: float = 5.3093
    kappa_a: float = 0.1
    kappa_b: float = 0.1
    henry_a1: float = 2.69
    henry_a2: float = 0.1
    henry_b1: float = 3.73
    henry_b2: float = 0.3
    langmuir_a1: float = 0.0336
    langmuir_a2: float = 1.0
    langmuir_b1: float = 0.0466
    langmuir_b2: float = 3.0
    feed_a: float = 2.9
    feed_b: float = 2.9

    @classmethod
    def from_dict(cls, data: dict[str, Any], complete: bool = True) -> ChromatographyCoefficients:
        """
        Build coefficients from a mapping.

        Args:
            data: Coefficient mapping (keys as the dataclass fields)
            complete: Require every field to be present

        Raises:
            InvalidInputError: Unknown or (when complete) missing keys
        """
        names = [f.name for f in fields(cls)]
        unknown = sorted(set(data) - set(names))
        if unknown:
            raise InvalidInputError(f"unknown chromatography coefficients: {', '.join(unknown)}")
        if complete:
            missing = [n for n in names if n not in data]
            if missing:
                raise InvalidInputError(
                    f"incomplete chromatography coefficients, missing: {', '.join(missing)}"
                )
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def phase_ratio(self) -> float:
        return (1.0 - self.porosity) / self.porosity

    def rate_factor(self, flow_rate: float) -> float:
        """Column length over interstitial velocity, L ε A_c / Q."""
        return self.column_length * self.porosity * self.column_area / flow_rate


class ChromatographyNonlinearity(Nonlinearity):
    """Mass transfer terms of the two-component column, state [c_a, c_b, q_a, q_b]."""

    def __init__(self, n_cells: int, coefficients: ChromatographyCoefficients):
        self.n_cells = n_cells
        self.size = 4 * n_cells
        self.coefficients = coefficients

    def equilibrium(self, c_a: np.ndarray, c_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Bi-Langmuir loadings in feed-scaled units; zero concentration gives zero loading."""
        k = self.coefficients
        denom_1 = 1.0 + k.langmuir_a1 * k.feed_a * c_a + k.langmuir_b1 * k.feed_b * c_b
        denom_2 = 1.0 + k.langmuir_a2 * k.feed_a * c_a + k.langmuir_b2 * k.feed_b * c_b
        q_a = k.henry_a1 * c_a / denom_1 + k.henry_a2 * c_a / denom_2
        q_b = k.henry_b1 * c_b / denom_1 + k.henry_b2 * c_b / denom_2
        return q_a, q_b

    def _blocks(self, c_a, c_b, q_a, q_b, mu):
        k = self.coefficients
        rate = k.rate_factor(mu.coords[0])
        q_eq_a, q_eq_b = self.equilibrium(c_a, c_b)
        h_a = rate * k.kappa_a * (q_eq_a - q_a)
        h_b = rate * k.kappa_b * (q_eq_b - q_b)
        F = k.phase_ratio
        return np.concatenate([-F * h_a, -F * h_b, h_a, h_b], axis=0)

    def evaluate(self, x, mu):
        x = np.asarray(x, dtype=float)
        n = self.n_cells
        return self._blocks(x[:n], x[n : 2 * n], x[2 * n : 3 * n], x[3 * n :], mu)

    def restrict(self, indices):
        idx = _as_indices(indices, self.size)
        n = self.n_cells
        cells = np.unique(idx % n)
        m = cells.size
        closure = np.concatenate([cells + j * n for j in range(4)])
        rows = (idx // n) * m + np.searchsorted(cells, idx % n)

        def _local(xc, mu):
            xc = np.asarray(xc, dtype=float)
            full = self._blocks(xc[:m], xc[m : 2 * m], xc[2 * m : 3 * m], xc[3 * m :], mu)
            return full[rows]

        return RestrictedNonlinearity(idx, closure, _local)


# ---------------------------------------------------------------------------
# Full-order model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SemiImplicitFom:
    """A full-order model Ẽ(μ)x^{k+1} = Ã(μ)x^k + Δt f(x^k, μ) + Δt B u^k, y = Cx."""

    name: str
    size: int
    E_tilde: AffineOperator
    A_tilde: AffineOperator
    B: sp.csr_matrix
    C: np.ndarray
    nonlinearity: Nonlinearity
    input_signal: Callable[[float, ParameterPoint | None], np.ndarray]
    dt: float
    end_time: Callable[[ParameterPoint | None], float]
    snapshot_stride: int
    domain: ParameterDomain
    x0: np.ndarray | None = None
    t0: float = 0.0

    @property
    def is_E_parametric(self) -> bool:
        return self.E_tilde.parametric

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    def initial_state(self) -> np.ndarray:
        return np.zeros(self.size) if self.x0 is None else np.array(self.x0, dtype=float)

    def E(self, mu: ParameterPoint | None) -> sp.csr_matrix:
        return self.E_tilde.assemble(mu)

    def A(self, mu: ParameterPoint | None) -> sp.csr_matrix:
        return self.A_tilde.assemble(mu)

    def f(self, x: np.ndarray, mu: ParameterPoint | None) -> np.ndarray:
        return self.nonlinearity.evaluate(x, mu)

    def restrict(self, indices: Sequence[int]) -> RestrictedNonlinearity:
        return self.nonlinearity.restrict(indices)

    def f_restricted(self, x: np.ndarray, mu: ParameterPoint | None, indices: Sequence[int]):
        """Components of f at indices, evaluated from x on the stencil closure only."""
        restricted = self.restrict(indices)
        return restricted(np.asarray(x)[restricted.closure], mu)

    def n_steps(self, mu: ParameterPoint | None) -> int:
        if self.dt <= 0:
            raise InvalidInputError(f"{self.name}: time step must be positive to simulate")
        return max(1, int(round((self.end_time(mu) - self.t0) / self.dt)))

    def snapshot_steps(self, mu: ParameterPoint | None) -> np.ndarray:
        """1-based step numbers whose states are stored as snapshots."""
        total = self.n_steps(mu)
        steps = np.arange(self.snapshot_stride, total + 1, self.snapshot_stride)
        if steps.size == 0:
            steps = np.array([total])
        return steps

    def input(self, k: int, mu: ParameterPoint | None) -> np.ndarray:
        """u^k, the input applied when stepping from t_k to t_{k+1}."""
        return np.atleast_1d(np.asarray(self.input_signal(self.t0 + k * self.dt, mu), dtype=float))

    def inputs(self, steps: Sequence[int], mu: ParameterPoint | None) -> np.ndarray:
        return np.column_stack([self.input(k, mu) for k in steps])

    def check_point(self, mu: ParameterPoint | None) -> ParameterPoint | None:
        if mu is None:
            if self.domain.dim:
                raise InvalidInputError(f"{self.name} needs a parameter point")
            return None
        if mu.domain != self.domain and not self.domain.contains(mu.coords):
            raise InvalidInputError(f"parameter {mu.coords} outside the domain of {self.name}")
        return mu

    def check_nonsingular(self, points: Sequence[ParameterPoint | None]) -> None:
        """Assert σ_min(Ẽ(μ)) > 0 on the sampled parameters."""
        for mu in points:
            if smallest_singular_value(self.E(mu)) <= 0.0:
                coords = mu.coords if mu is not None else ()
                raise NumericFailureError(f"{self.name}: Ẽ is singular at μ = {coords}")


@dataclass(frozen=True)
class Trajectory:
    """FOM states and nonlinear snapshots at snapshot instants, outputs at every step."""

    mu: ParameterPoint | None
    states: np.ndarray
    outputs: np.ndarray
    nonlinear_snapshots: np.ndarray
    times: np.ndarray
    steps: np.ndarray

    @property
    def n_snapshots(self) -> int:
        return self.states.shape[1]

    @property
    def snapshot_outputs(self) -> np.ndarray:
        return self.outputs[:, self.steps - 1]


def simulate_fom(fom: SemiImplicitFom, mu: ParameterPoint | None) -> Trajectory:
    """
    Integrate the full-order model with a sparse LU of Ẽ(μ).

    Args:
        fom: Model
        mu: Parameter (None for non-parametric models)

    Returns:
        Trajectory with states and f at every snapshot_stride-th step

    Raises:
        InvalidInputError: μ outside the domain
        NumericFailureError: Singular Ẽ(μ) or a non-finite state (with step index)
    """
    mu = fom.check_point(mu)
    total = fom.n_steps(mu)
    steps = fom.snapshot_steps(mu)
    try:
        lu = spsla.splu(sp.csc_matrix(fom.E(mu)))
    except RuntimeError as e:
        raise NumericFailureError(f"{fom.name}: cannot factor Ẽ(μ): {e}", step=0)
    A = fom.A(mu)

    x = fom.initial_state()
    states = np.empty((fom.size, steps.size))
    outputs = np.empty((fom.n_outputs, total))
    j = 0
    for k in range(total):
        rhs = A @ x + fom.dt * fom.f(x, mu) + fom.dt * (fom.B @ fom.input(k, mu))
        x = lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise NumericFailureError(f"{fom.name}: state became non-finite", step=k + 1)
        outputs[:, k] = fom.C @ x
        if j < steps.size and steps[j] == k + 1:
            states[:, j] = x
            j += 1

    return Trajectory(
        mu=mu,
        states=states,
        outputs=outputs,
        nonlinear_snapshots=fom.f(states, mu),
        times=fom.t0 + steps * fom.dt,
        steps=steps,
    )


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------


def _tridiagonal(n: int, lower: float, main: float, upper: float) -> sp.lil_matrix:
    return sp.diags([lower, main, upper], [-1, 0, 1], shape=(n, n), format="lil")


def burgers_operators(N: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Second-difference L and central first-difference D with the Burgers' boundaries."""
    h = 1.0 / N
    L = _tridiagonal(N, 1.0, -2.0, 1.0)
    L[N - 1, N - 2] = 2.0  # ghost node w_{N+1} = w_{N-1}
    D = _tridiagonal(N, -1.0, 0.0, 1.0)
    D[N - 1, N - 2] = 0.0
    return (L.tocsr() / h**2), (D.tocsr() / (2.0 * h))


def assemble_burgers(
    N: int,
    dt: float,
    horizon: tuple[float, float] = (0.0, 2.0),
    mu_domain: tuple[float, float] = (5e-4, 1.0),
    snapshot_stride: int = 10,
) -> SemiImplicitFom:
    """
    Assemble the viscous Burgers' benchmark.

    Args:
        N: Number of unknown nodes (≥ 3)
        dt: Time step (0 is accepted for operator inspection only)
        horizon: (t0, T)
        mu_domain: Viscosity interval
        snapshot_stride: Steps between stored snapshots

    Returns:
        SemiImplicitFom with Ẽ(μ) = I − Δt μ L
    """
    if N < 3:
        raise InvalidInputError(f"Burgers' model needs N >= 3, got {N}")
    if dt < 0:
        raise InvalidInputError(f"time step must be non-negative, got {dt}")
    L, D = burgers_operators(N)
    M = sp.identity(N, format="csr")
    t0, T = horizon
    return SemiImplicitFom(
        name="burgers",
        size=N,
        E_tilde=AffineOperator.affine([(_one, M), (lambda mu: mu[0], -dt * L)]),
        A_tilde=AffineOperator.constant(M),
        B=sp.csr_matrix(np.ones((N, 1))),
        C=np.eye(1, N, N - 1),
        nonlinearity=ConvectionNonlinearity(D),
        input_signal=lambda t, mu: np.ones(1),
        dt=dt,
        end_time=lambda mu: T,
        snapshot_stride=snapshot_stride,
        domain=ParameterDomain((mu_domain[0],), (mu_domain[1],), ("viscosity",)),
        t0=t0,
    )


@dataclass(frozen=True)
class ChromatographyTimeStep:
    """
    Time step policy for the column.

    The explicit mass transfer term is stable while Δt times its stiffest rate
    stays below 2; the step is stiffness_fraction over that rate, capped by dt_max.
    """

    dt_max: float = 0.005
    stiffness_fraction: float = 1.0

    def resolve(self, coefficients: ChromatographyCoefficients, min_flow_rate: float) -> float:
        k = coefficients
        rate = max(k.kappa_a, k.kappa_b) * k.rate_factor(min_flow_rate)
        capacity = max(k.henry_a1 + k.henry_a2, k.henry_b1 + k.henry_b2)
        stiffness = rate * (1.0 + k.phase_ratio * capacity)
        return min(self.dt_max, self.stiffness_fraction / stiffness)


def column_operator(n_cells: int, peclet: float) -> sp.csr_matrix:
    """Finite-volume convection-dispersion operator K with dc/dt = −K c + inflow."""
    dx = 1.0 / n_cells
    d = 1.0 / (peclet * dx**2)
    K = sp.lil_matrix((n_cells, n_cells))
    for i in range(n_cells):
        K[i, i] = 1.0 / dx
        if i < n_cells - 1:
            K[i, i] += d
            K[i, i + 1] = -d
        if i > 0:
            K[i, i] += d
            K[i, i - 1] = -1.0 / dx - d
    return K.tocsr()


def assemble_chromatography(
    N: int,
    time_step: ChromatographyTimeStep | float | int | None = None,
    coefficients: ChromatographyCoefficients | dict[str, Any] | None = None,
    flow_domain: tuple[float, float] = (0.0667, 0.1667),
    injection_domain: tuple[float, float] = (0.5, 2.0),
    horizon_factor: float = 1.5,
    snapshot_stride: int = 10,
) -> SemiImplicitFom:
    """
    Assemble the two-component batch chromatography column.

    Args:
        N: State dimension, 4 × number of cells
        time_step: Fixed Δt or a ChromatographyTimeStep policy
        coefficients: Physical constants (dict entries must be complete)
        flow_domain: Interval of the feed flow rate Q
        injection_domain: Interval of the injection period t_in
        horizon_factor: c in T(Q) = c / Q
        snapshot_stride: Steps between stored snapshots

    Returns:
        SemiImplicitFom with constant block-tridiagonal Ẽ and Ã = I
    """
    if N < 12 or N % 4:
        raise InvalidInputError(f"chromatography needs N divisible by 4 and >= 12, got {N}")
    if coefficients is None:
        coefficients = ChromatographyCoefficients()
    elif isinstance(coefficients, dict):
        coefficients = ChromatographyCoefficients.from_dict(coefficients)
    if time_step is None:
        time_step = ChromatographyTimeStep()
    if isinstance(time_step, numbers.Real):
        dt = float(time_step)
    else:
        dt = time_step.resolve(coefficients, flow_domain[0])

    n = N // 4
    dx = 1.0 / n
    I_n = sp.identity(n, format="csr")
    E_c = I_n + dt * column_operator(n, coefficients.peclet)
    E = sp.block_diag([E_c, E_c, I_n, I_n], format="csr")

    B = sp.lil_matrix((N, 1))
    B[0, 0] = 1.0 / dx
    B[n, 0] = 1.0 / dx

    C = np.zeros((2, N))
    C[0, n - 1] = 1.0
    C[1, 2 * n - 1] = 1.0

    def _feed(t: float, mu: ParameterPoint | None) -> np.ndarray:
        return np.array([1.0 if t <= mu.coords[1] else 0.0])

    return SemiImplicitFom(
        name="chromatography",
        size=N,
        E_tilde=AffineOperator.constant(E),
        A_tilde=AffineOperator.constant(sp.identity(N, format="csr")),
        B=B.tocsr(),
        C=C,
        nonlinearity=ChromatographyNonlinearity(n, coefficients),
        input_signal=_feed,
        dt=dt,
        end_time=lambda mu: horizon_factor / mu.coords[0],
        snapshot_stride=snapshot_stride,
        domain=ParameterDomain(
            (flow_domain[0], injection_domain[0]),
            (flow_domain[1], injection_domain[1]),
            ("flow_rate", "injection_period"),
        ),
    )


def assemble_synthetic_rd(
    N: int,
    dt: float = 1e-3,
    horizon: tuple[float, float] = (0.0, 1.0),
    source: float = 10.0,
    snapshot_stride: int = 10,
) -> SemiImplicitFom:
    """
    Assemble the non-parametric reaction-diffusion model.

    Args:
        N: Interior nodes (≥ 3), mesh width 1/(N+1)
        dt: Time step
        horizon: (t0, T)
        source: Constant source amplitude
        snapshot_stride: Steps between stored snapshots

    Returns:
        SemiImplicitFom with Ẽ = I − Δt L and f(x) = x − x³
    """
    if N < 3:
        raise InvalidInputError(f"reaction-diffusion model needs N >= 3, got {N}")
    h = 1.0 / (N + 1)
    L = _tridiagonal(N, 1.0, -2.0, 1.0).tocsr() / h**2
    I_N = sp.identity(N, format="csr")
    t0, T = horizon
    return SemiImplicitFom(
        name="synthetic-rd",
        size=N,
        E_tilde=AffineOperator.constant(I_N - dt * L),
        A_tilde=AffineOperator.constant(I_N),
        B=sp.csr_matrix(np.ones((N, 1))),
        C=np.eye(1, N, N // 2),
        nonlinearity=PointwiseNonlinearity(N, lambda x: x - x**3),
        input_signal=lambda t, mu: np.array([source]),
        dt=dt,
        end_time=lambda mu: T,
        snapshot_stride=snapshot_stride,
        domain=ParameterDomain.empty(),
        t0=t0,
    )


def build_model(cfg: ModelConfig) -> SemiImplicitFom:
    """
    Assemble the model a configuration refers to.

    Args:
        cfg: Model section of an experiment configuration

    Returns:
        SemiImplicitFom

    Raises:
        InvalidInputError: Unknown model id
    """
    if cfg.id == "burgers":
        return assemble_burgers(
            cfg.size,
            cfg.dt,
            horizon=cfg.horizon,
            mu_domain=tuple(cfg.domain[0]),
            snapshot_stride=cfg.snapshot_stride,
        )
    if cfg.id == "chromatography":
        step = float(cfg.dt) if cfg.dt else ChromatographyTimeStep(**cfg.time_step)
        return assemble_chromatography(
            cfg.size,
            time_step=step,
            coefficients=ChromatographyCoefficients.from_dict(cfg.coefficients, complete=False),
            flow_domain=tuple(cfg.domain[0]),
            injection_domain=tuple(cfg.domain[1]),
            horizon_factor=cfg.horizon_factor,
            snapshot_stride=cfg.snapshot_stride,
        )
    if cfg.id == "synthetic-rd":
        return assemble_synthetic_rd(
            cfg.size,
            cfg.dt,
            horizon=cfg.horizon,
            source=cfg.source,
            snapshot_stride=cfg.snapshot_stride,
        )
    raise InvalidInputError(f"unknown model id '{cfg.id}' (known: {', '.join(MODEL_IDS)})")
