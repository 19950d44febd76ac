"""Radial-basis surrogate of the inf-sup constant σ_min(Ẽ(μ)).

The surrogate interpolates log σ_min over parameter coordinates mapped to the
unit box (log10 on log-uniformly sampled axes), so exponentiating keeps every
estimate positive. Centers start from the training points nearest to the
domain center, its corners and a Latin hypercube sample, and grow greedily
where the criterion

    c(μ) = |s(μ) − s(nearest center)| · dist(μ, centers)

is largest (s is the log-space surrogate). Enrichment stops once the relative
change of the surrogate over the training set drops below tol_change.
"""

from __future__ import annotations

import time
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.interpolate import RBFInterpolator
from scipy.spatial.distance import cdist
from scipy.stats import qmc

from . import ui
from .errors import InvalidInputError, NumericFailureError
from .linalg import smallest_singular_value
from .models import ParameterDomain, ParameterPoint, TrainingSet
from .utils import argmax_first, map_ordered

THIN_PLATE = "thin_plate_spline"
GAUSSIAN = "gaussian"
KERNELS = (THIN_PLATE, GAUSSIAN)
DEFAULT_TOL_CHANGE = 1e-2
DEFAULT_MAX_CENTERS = 15
_GAUSSIAN_SHAPES = (0.5, 1.0, 2.0, 4.0, 8.0)
_JITTER = (1e-12, 1e-10, 1e-8)

MatrixBuilder = Callable[[ParameterPoint | None], Any]


def unit_coordinates(
    coords: np.ndarray, domain: ParameterDomain, log_axes: tuple[bool, ...]
) -> np.ndarray:
    """Map parameter coordinates (n × d) to [0, 1]^d."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    out = np.empty_like(coords)
    for i, (lo, hi) in enumerate(zip(domain.lower, domain.upper, strict=True)):
        column = coords[:, i]
        if log_axes and log_axes[i]:
            column, lo, hi = np.log10(column), np.log10(lo), np.log10(hi)
        out[:, i] = (column - lo) / (hi - lo) if hi > lo else 0.0
    return out


def _fit(points: np.ndarray, values: np.ndarray, kernel: str, epsilon: float | None):
    kwargs: dict[str, Any] = {"kernel": kernel}
    if kernel == THIN_PLATE:
        kwargs["degree"] = 1 if len(points) > points.shape[1] else 0
    else:
        kwargs["epsilon"] = epsilon
        kwargs["degree"] = 0
    for smoothing in (0.0, *_JITTER):
        try:
            return RBFInterpolator(points, values, smoothing=smoothing, **kwargs)
        except (np.linalg.LinAlgError, ValueError) as e:
            ui.show_debug(f"RBF fit with smoothing {smoothing:g} failed: {e}")
    raise NumericFailureError(f"RBF kernel matrix is singular for {len(points)} centers")


def _gaussian_shape(points: np.ndarray, values: np.ndarray) -> float:
    """Shape parameter by leave-one-out error over a small grid."""
    if len(points) < 3:
        return _GAUSSIAN_SHAPES[1]
    best, best_error = _GAUSSIAN_SHAPES[1], np.inf
    for epsilon in _GAUSSIAN_SHAPES:
        errors = []
        for i in range(len(points)):
            mask = np.arange(len(points)) != i
            try:
                fit = RBFInterpolator(points[mask], values[mask], kernel=GAUSSIAN, epsilon=epsilon, degree=0)
            except (np.linalg.LinAlgError, ValueError):
                errors.append(np.inf)
                continue
            errors.append(abs(float(fit(points[i : i + 1])[0]) - values[i]))
        error = max(errors)
        if error < best_error:
            best, best_error = epsilon, error
    return best


@dataclass(frozen=True)
class InfSupSurrogate:
    """σ_min surrogate over a parameter domain."""

    domain: ParameterDomain
    log_axes: tuple[bool, ...]
    centers: tuple[ParameterPoint, ...]
    values: np.ndarray
    kernel: str = THIN_PLATE
    epsilon: float | None = None
    history: tuple[float, ...] = ()
    converged: bool = True
    _model: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if len(self.centers) != values.size or values.size == 0:
            raise InvalidInputError("surrogate needs one positive value per center")
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise InvalidInputError("σ_min values at centers must be positive and finite")
        if self.kernel not in KERNELS:
            raise InvalidInputError(f"unknown RBF kernel '{self.kernel}'")
        if self._model is None and self.domain.dim and values.size > 1:
            object.__setattr__(
                self, "_model", _fit(self.unit_centers, np.log(values), self.kernel, self.epsilon)
            )

    @property
    def is_constant(self) -> bool:
        return self._model is None

    @property
    def unit_centers(self) -> np.ndarray:
        coords = np.array([c.coords for c in self.centers], dtype=float).reshape(len(self.centers), -1)
        return unit_coordinates(coords, self.domain, self.log_axes)

    def log_values(self, coords: np.ndarray) -> np.ndarray:
        """Surrogate of log σ_min at parameter coordinates (n × d)."""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if self.is_constant:
            return np.full(coords.shape[0], float(np.log(self.values[0])))
        return self._model(unit_coordinates(coords, self.domain, self.log_axes))

    def __call__(self, mu: ParameterPoint | None) -> float:
        return eval_surrogate(self, mu)

    def to_dict(self) -> dict[str, Any]:
        return {
            "lower": list(self.domain.lower),
            "upper": list(self.domain.upper),
            "names": list(self.domain.names),
            "log_axes": list(self.log_axes),
            "centers": [list(c.coords) for c in self.centers],
            "values": self.values.tolist(),
            "kernel": self.kernel,
            "epsilon": self.epsilon,
            "history": list(self.history),
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> InfSupSurrogate:
        domain = ParameterDomain(tuple(data["lower"]), tuple(data["upper"]), tuple(data["names"]))
        return cls(
            domain=domain,
            log_axes=tuple(data["log_axes"]),
            centers=tuple(ParameterPoint(tuple(c), domain) for c in data["centers"]),
            values=np.asarray(data["values"], dtype=float),
            kernel=data["kernel"],
            epsilon=data.get("epsilon"),
            history=tuple(data.get("history", ())),
            converged=bool(data.get("converged", True)),
        )


def eval_surrogate(surrogate: InfSupSurrogate, mu: ParameterPoint | None) -> float:
    """Positive σ_min estimate at μ."""
    if surrogate.is_constant:
        return float(surrogate.values[0])
    if mu is None:
        raise InvalidInputError("parametric surrogate needs a parameter point")
    return float(np.exp(surrogate.log_values(np.asarray(mu.coords))[0]))


def _sigma(builder: MatrixBuilder, mu: ParameterPoint | None) -> float:
    value = smallest_singular_value(builder(mu))
    if not value > 0.0:
        coords = mu.coords if mu is not None else ()
        raise NumericFailureError(f"σ_min vanishes at μ = {coords}; log-space fit undefined")
    return value


def initial_centers(training: TrainingSet, n_coarse: int, seed: int = 0) -> list[int]:
    """
    Training indices of the initial coarse set.

    Candidates are the domain center, its corners and a Latin hypercube
    sample, each snapped to the nearest training point; duplicates are
    skipped until n_coarse distinct points are found.
    """
    domain = training.domain
    d = domain.dim
    unit = unit_coordinates(training.as_array(), domain, training.log_axes)
    candidates = [np.full(d, 0.5)]
    candidates += [np.array(c, dtype=float) for c in np.ndindex(*(2,) * d)]
    candidates += list(qmc.LatinHypercube(d=d, seed=seed).random(max(n_coarse, 1)))

    chosen: list[int] = []
    distances = cdist(np.asarray(candidates), unit)
    for row in distances:
        idx = int(np.argmin(row))
        if idx not in chosen:
            chosen.append(idx)
        if len(chosen) == n_coarse:
            break
    # pad from the training order if snapping collapsed candidates
    for idx in range(len(training)):
        if len(chosen) >= n_coarse:
            break
        if idx not in chosen:
            chosen.append(idx)
    return chosen


def build_surrogate(
    training: TrainingSet,
    builder: MatrixBuilder,
    n_coarse: int | None = None,
    tol_change: float = DEFAULT_TOL_CHANGE,
    max_centers: int = DEFAULT_MAX_CENTERS,
    kernel: str = THIN_PLATE,
    seed: int = 0,
    jobs: int = 1,
) -> InfSupSurrogate:
    """
    Greedy RBF interpolation of σ_min over the training set.

    Args:
        training: Training set Ξ
        builder: μ → Ẽ(μ)
        n_coarse: Initial center count (default max(d+1, 4))
        tol_change: Stop when the L∞ relative change over Ξ falls below this
        max_centers: Hard cap on the number of centers
        kernel: "thin_plate_spline" or "gaussian"
        seed: Latin hypercube seed
        jobs: Workers for the σ_min solves at the initial centers

    Returns:
        InfSupSurrogate; converged is False when max_centers stopped it

    Raises:
        InvalidInputError: n_coarse < d + 1
        NumericFailureError: σ_min = 0 at a center, or an unrecoverable fit
    """
    domain = training.domain
    d = domain.dim
    if d == 0 or len(training) == 1:
        mu = training[0]
        return InfSupSurrogate(domain, training.log_axes, (mu,), np.array([_sigma(builder, mu)]), kernel)

    n_coarse = max(d + 1, 4) if n_coarse is None else n_coarse
    if n_coarse < d + 1:
        raise InvalidInputError(f"n_coarse must be >= d + 1 = {d + 1}, got {n_coarse}")
    n_coarse = min(n_coarse, len(training))
    max_centers = min(max(max_centers, n_coarse), len(training))

    unit = unit_coordinates(training.as_array(), domain, training.log_axes)
    chosen = initial_centers(training, n_coarse, seed)
    values = list(map_ordered(lambda i: _sigma(builder, training[i]), chosen, jobs))

    def _surrogate(history, converged) -> InfSupSurrogate:
        log_values = np.log(np.asarray(values))
        epsilon = _gaussian_shape(unit[chosen], log_values) if kernel == GAUSSIAN else None
        return InfSupSurrogate(
            domain,
            training.log_axes,
            tuple(training[i] for i in chosen),
            np.asarray(values),
            kernel,
            epsilon,
            tuple(history),
            converged,
        )

    history: list[float] = []
    current = _surrogate(history, False)
    s_old = current.log_values(training.as_array())
    while len(chosen) < max_centers:
        nearest = np.argmin(cdist(unit, unit[chosen]), axis=1)
        spacing = np.min(cdist(unit, unit[chosen]), axis=1)
        criterion = np.abs(s_old - np.log(np.asarray(values))[nearest]) * spacing
        winner = argmax_first(criterion)
        if criterion[winner] <= 0.0:
            break
        chosen.append(winner)
        values.append(_sigma(builder, training[winner]))
        current = _surrogate(history, False)
        s_new = current.log_values(training.as_array())
        change = float(np.max(np.abs(np.exp(s_new) - np.exp(s_old)) / np.exp(s_old)))
        history.append(change)
        ui.show_debug(f"inf-sup surrogate: {len(chosen)} centers, change {change:.3e}")
        s_old = s_new
        if change < tol_change:
            return _surrogate(history, True)

    if history and history[-1] >= tol_change:
        ui.show_warning(
            f"inf-sup surrogate stopped at {len(chosen)} centers with change {history[-1]:.2e}"
        )
        return _surrogate(history, False)
    return _surrogate(history, True)


@dataclass(frozen=True)
class SurrogateValidation:
    """Surrogate against a direct σ_min sweep over a training set."""

    relative_errors: np.ndarray
    direct_seconds: float
    surrogate_seconds: float

    @property
    def max_relative_error(self) -> float:
        return float(np.max(self.relative_errors))

    @property
    def speedup(self) -> float:
        if self.surrogate_seconds <= 0.0:
            return float("inf")
        return self.direct_seconds / self.surrogate_seconds


def validate_surrogate(
    surrogate: InfSupSurrogate, training: TrainingSet, builder: MatrixBuilder, jobs: int = 1
) -> SurrogateValidation:
    """
    Compare the surrogate with direct σ_min at every training point.

    Args:
        surrogate: Built surrogate
        training: Points to check
        builder: μ → Ẽ(μ)
        jobs: Workers for the direct sweep

    Returns:
        SurrogateValidation with per-point relative errors and both sweep timings
    """
    points = list(training)
    start = time.perf_counter()
    direct = np.asarray(map_ordered(lambda mu: smallest_singular_value(builder(mu)), points, jobs))
    direct_seconds = time.perf_counter() - start

    start = time.perf_counter()
    estimated = np.exp(surrogate.log_values(training.as_array()))
    surrogate_seconds = time.perf_counter() - start

    return SurrogateValidation(
        relative_errors=np.abs(estimated - direct) / direct,
        direct_seconds=direct_seconds,
        surrogate_seconds=surrogate_seconds,
    )
