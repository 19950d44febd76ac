"""Configuration-driven experiment runner."""

from __future__ import annotations

import csv
import time
from pathlib import Path

import numpy as np

from . import ui
from .config import (
    ADAPTIVE,
    FOM_SIM,
    INFSUP,
    STANDARD,
    STANDARD_DEIM,
    TWOWAY,
    ExperimentConfig,
    TrainingConfig,
)
from .errors import ConfigError, RomError
from .greedy import (
    SURROGATE,
    GreedyState,
    LandscapeRecord,
    ValidationRecord,
    adaptive_pod_deim_twoway,
    adaptive_pod_greedy_deim,
    error_landscape,
    pod_greedy_deim_standard,
    pod_greedy_standard,
    twoway_bases,
    validate_rom,
    validation_points,
)
from .infsup import InfSupSurrogate, build_surrogate, validate_surrogate
from .manifest import save_rom
from .matrix_io import export_csv, write_matrix
from .models import ParameterDomain, SemiImplicitFom, TrainingSet, build_model, simulate_fom
from .reduction import simulate_rom
from .summary import FAILED, ITERATIONS_FILE, NOT_CONVERGED, OK, RunSummary, new_summary, write_iterations
from .utils import get_host_id

VALIDATION_FILE = "validation.csv"
OVERLAY_FILE = "overlay.csv"
LANDSCAPE_FILE = "landscape.csv"
INFSUP_FILE = "infsup.csv"

_GREEDY_DRIVERS = {
    STANDARD: pod_greedy_standard,
    STANDARD_DEIM: pod_greedy_deim_standard,
    ADAPTIVE: adaptive_pod_greedy_deim,
}


def make_training(cfg: TrainingConfig, domain: ParameterDomain) -> TrainingSet:
    """Training set Ξ described by the training section."""
    if cfg.sampling == "explicit":
        return TrainingSet.explicit(domain, cfg.points)
    if cfg.sampling == "log-uniform":
        return TrainingSet.log_uniform(domain, cfg.counts)
    return TrainingSet.uniform(domain, cfg.counts)


def run_dir_for(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output) / cfg.name


def run_experiment(cfg: ExperimentConfig) -> RunSummary:
    """
    Execute the configured pipeline and write its artifacts.

    A pipeline failure does not raise: the summary records the failure and
    whatever artifacts were already written stay in place.

    Args:
        cfg: Experiment configuration

    Returns:
        RunSummary (also written as summary.json in the run directory)

    Raises:
        ConfigError: The configuration does not validate
    """
    errors = cfg.validate()
    if errors:
        raise ConfigError("config", "; ".join(errors))

    run_dir = run_dir_for(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)
    summary = new_summary(cfg.name, cfg.pipeline, cfg.model.id, cfg.config_hash(), get_host_id())
    started = time.perf_counter()

    try:
        fom = build_model(cfg.model)
        training = make_training(cfg.training, fom.domain)
        ui.show_info(
            f"{cfg.name}: {cfg.pipeline} on {fom.name} (N = {fom.size}, |Ξ| = {len(training)})"
        )
        if cfg.pipeline == FOM_SIM:
            _run_fom_sim(fom, training, run_dir, summary)
        elif cfg.pipeline == INFSUP:
            _run_infsup(cfg, fom, training, run_dir, summary)
        elif cfg.pipeline == TWOWAY:
            _run_twoway(cfg, fom, training, run_dir, summary)
        else:
            _run_greedy(cfg, fom, training, run_dir, summary)
    except RomError as e:
        ui.show_error(f"{cfg.name}: {e}")
        summary.status = FAILED
        summary.failure = f"{type(e).__name__}: {e}"

    summary.wall_time = time.perf_counter() - started
    summary.save(run_dir)
    return summary


def _surrogate(cfg: ExperimentConfig, fom: SemiImplicitFom, training: TrainingSet) -> InfSupSurrogate:
    return build_surrogate(
        training,
        fom.E,
        n_coarse=cfg.infsup.n_coarse,
        tol_change=cfg.infsup.tol_change,
        max_centers=cfg.infsup.max_centers,
        kernel=cfg.infsup.kernel,
        seed=cfg.greedy.seed or 0,
        jobs=cfg.greedy.jobs,
    )


def _finish_greedy(
    cfg: ExperimentConfig, fom: SemiImplicitFom, state: GreedyState, run_dir: Path, summary: RunSummary
) -> None:
    """Shared artifact writing and summary bookkeeping of greedy-style runs."""
    summary.register(run_dir, write_iterations(run_dir / ITERATIONS_FILE, state.records))
    manifest = save_rom(run_dir, state, cfg)
    summary.register(run_dir, manifest)
    for name in ("V.bin", "U_f.bin", "V_du.bin"):
        if (run_dir / name).exists():
            summary.register(run_dir, run_dir / name)

    summary.termination = state.termination
    summary.status = OK if state.accepted else NOT_CONVERGED
    summary.iterations = state.iterations
    summary.n_rb = state.n_rb
    summary.n_ei = state.n_ei
    summary.fom_solves = state.fom_solves
    summary.max_estimate = state.max_estimate
    summary.max_true_error = state.max_true_error
    summary.rho_bar = state.rho_bar
    summary.timings.update(state.timings)

    if cfg.overlay:
        summary.register(run_dir, write_overlay(run_dir / OVERLAY_FILE, fom, state, cfg.overlay))
    if not state.accepted:
        ui.show_warning(f"{cfg.name}: terminated with '{state.termination}' outside the zone of acceptance")


def _run_greedy(
    cfg: ExperimentConfig,
    fom: SemiImplicitFom,
    training: TrainingSet,
    run_dir: Path,
    summary: RunSummary,
) -> None:
    surrogate = None
    if fom.is_E_parametric and cfg.greedy.infsup == SURROGATE:
        start = time.perf_counter()
        surrogate = _surrogate(cfg, fom, training)
        summary.timings["surrogate"] = time.perf_counter() - start

    state = _GREEDY_DRIVERS[cfg.pipeline](fom, training, cfg.greedy, surrogate)
    _finish_greedy(cfg, fom, state, run_dir, summary)

    if cfg.validation_points > 0:
        points = validation_points(training, state, cfg.validation_points, cfg.greedy.seed)
        start = time.perf_counter()
        records = validate_rom(fom, state, points, cfg.greedy.jobs)
        summary.timings["validation"] = time.perf_counter() - start
        summary.fom_solves += len(points)
        summary.register(run_dir, write_validation(run_dir / VALIDATION_FILE, records))


def _run_twoway(
    cfg: ExperimentConfig,
    fom: SemiImplicitFom,
    training: TrainingSet,
    run_dir: Path,
    summary: RunSummary,
) -> None:
    start = time.perf_counter()
    reference, V_full, interp_full = twoway_bases(fom, cfg.greedy, training[0])
    summary.timings["offline"] = time.perf_counter() - start
    ui.show_info(f"conservative bases: (l_RB, l_EI) = ({V_full.rank}, {interp_full.size})")

    state = adaptive_pod_deim_twoway(fom, reference, V_full, interp_full, cfg.greedy)
    state.fom_solves = 1
    _finish_greedy(cfg, fom, state, run_dir, summary)

    if cfg.twoway.landscape_rb and cfg.twoway.landscape_ei:
        start = time.perf_counter()
        records = error_landscape(
            fom,
            reference,
            V_full,
            interp_full,
            cfg.twoway.landscape_rb,
            cfg.twoway.landscape_ei,
            cfg.greedy,
        )
        summary.timings["landscape"] = time.perf_counter() - start
        summary.register(run_dir, write_landscape(run_dir / LANDSCAPE_FILE, records))


def _run_fom_sim(
    fom: SemiImplicitFom, training: TrainingSet, run_dir: Path, summary: RunSummary
) -> None:
    start = time.perf_counter()
    for i, mu in enumerate(training):
        trajectory = simulate_fom(fom, mu)
        summary.register(run_dir, write_matrix(run_dir / f"states_{i:03d}.bin", trajectory.states))
        summary.register(
            run_dir, write_matrix(run_dir / f"nonlinear_{i:03d}.bin", trajectory.nonlinear_snapshots)
        )
        times = fom.t0 + fom.dt * np.arange(1, trajectory.outputs.shape[1] + 1)
        outputs = np.column_stack([times, trajectory.outputs.T])
        header = ["time"] + [f"y{j}" for j in range(fom.n_outputs)]
        summary.register(run_dir, export_csv(run_dir / f"outputs_{i:03d}.csv", outputs, header))
        summary.fom_solves += 1
    summary.timings["fom"] = time.perf_counter() - start


def _run_infsup(
    cfg: ExperimentConfig,
    fom: SemiImplicitFom,
    training: TrainingSet,
    run_dir: Path,
    summary: RunSummary,
) -> None:
    start = time.perf_counter()
    surrogate = _surrogate(cfg, fom, training)
    summary.timings["surrogate"] = time.perf_counter() - start

    report = validate_surrogate(surrogate, training, fom.E, cfg.greedy.jobs)
    summary.timings["direct_sweep"] = report.direct_seconds
    summary.timings["surrogate_sweep"] = report.surrogate_seconds
    summary.max_estimate = report.max_relative_error
    summary.iterations = len(surrogate.history)
    summary.termination = "converged" if surrogate.converged else "max_centers"

    path = run_dir / INFSUP_FILE
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([*fom.domain.names, "relative_error", "center"])
        centers = {c.coords for c in surrogate.centers}
        for mu, err in zip(training, report.relative_errors, strict=True):
            writer.writerow([*(f"{c:.10g}" for c in mu.coords), f"{err:.6e}", int(mu.coords in centers)])
    summary.register(run_dir, path)
    ui.show_info(
        f"surrogate: {len(surrogate.centers)} centers, max relative error "
        f"{report.max_relative_error:.2%}, speedup {report.speedup:.1f}x"
    )


def write_validation(path: Path, records: list[ValidationRecord]) -> Path:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            [
                "mu",
                "est_original",
                "est_modified",
                "true_original",
                "true_modified",
                "eff_original",
                "eff_modified",
            ]
        )
        for r in records:
            writer.writerow(
                [
                    " ".join(f"{c:.10g}" for c in r.mu or ()),
                    f"{r.est_original:.10g}",
                    f"{r.est_modified:.10g}",
                    f"{r.true_original:.10g}",
                    f"{r.true_modified:.10g}",
                    "" if r.eff_original is None else f"{r.eff_original:.6g}",
                    "" if r.eff_modified is None else f"{r.eff_modified:.6g}",
                ]
            )
    return path


def write_landscape(path: Path, records: list[LandscapeRecord]) -> Path:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["n_rb", "n_ei", "estimate", "true_error", "stable"])
        for r in records:
            writer.writerow([r.n_rb, r.n_ei, f"{r.estimate:.10g}", f"{r.true_error:.10g}", int(r.stable)])
    return path


def write_overlay(
    path: Path, fom: SemiImplicitFom, state: GreedyState, points: list[list[float]]
) -> Path:
    """FOM against ROM outputs at every time step for the given parameters."""
    rom = state.rom(fom)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["mu", "time", "output", "fom", "rom"])
        for coords in points:
            mu = fom.domain.point(*coords)
            reference = simulate_fom(fom, mu)
            reduced = simulate_rom(rom, mu)
            label = " ".join(f"{c:.10g}" for c in coords)
            n_steps = reduced.outputs.shape[1]
            for k in range(reference.outputs.shape[1]):
                t = fom.t0 + fom.dt * (k + 1)
                for j in range(fom.n_outputs):
                    value = reduced.outputs[j, k] if k < n_steps else float("nan")
                    writer.writerow([label, f"{t:.10g}", j, f"{reference.outputs[j, k]:.10g}", f"{value:.10g}"])
    return path
