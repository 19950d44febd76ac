"""Side-by-side comparison of finished runs."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import InvalidInputError
from .matrix_io import write_json_atomic
from .summary import ITERATIONS_FILE, RunSummary, read_iterations

COMPARISON_CSV = "comparison.csv"
COMPARISON_JSON = "comparison.json"
CONVERGENCE_CSV = "convergence.csv"

CONVERGENCE_COLUMNS = (
    "run",
    "iteration",
    "n_rb",
    "n_ei",
    "est_max",
    "true_error",
    "eff_original",
    "eff_modified",
)


@dataclass
class ComparisonRow:
    """One run in a comparison, with deltas against the first run."""

    name: str
    pipeline: str
    iterations: int
    n_rb: int
    n_ei: int
    wall_time: float
    max_estimate: float | None
    max_true_error: float | None
    termination: str | None
    delta_iterations: int = 0
    delta_n_ei: int = 0
    delta_wall_time: float = 0.0

    @property
    def change_summary(self) -> str:
        if self.delta_iterations == 0 and self.delta_n_ei == 0:
            return "no changes"
        return f"{self.delta_iterations:+d} iterations, {self.delta_n_ei:+d} l_EI"


@dataclass
class RunComparison:
    """Aligned summary table plus the per-iteration convergence curves."""

    model: str
    rows: list[ComparisonRow]
    curves: list[dict[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"model": self.model, "rows": [asdict(r) for r in self.rows]}


def compare_runs(run_dirs: list[Path]) -> RunComparison:
    """
    Compare runs of the same model.

    The first run is the baseline for the delta columns. Convergence curves
    are read from each run's iterations.csv when present.

    Args:
        run_dirs: At least two run directories

    Returns:
        RunComparison

    Raises:
        InvalidInputError: Fewer than two runs, or runs of different models
    """
    if len(run_dirs) < 2:
        raise InvalidInputError("comparison needs at least two runs")

    summaries = [RunSummary.load(Path(d)) for d in run_dirs]
    models = {s.model for s in summaries}
    if len(models) > 1:
        raise InvalidInputError(f"cannot compare runs of different models: {', '.join(sorted(models))}")

    base = summaries[0]
    rows = [
        ComparisonRow(
            name=s.name,
            pipeline=s.pipeline,
            iterations=s.iterations,
            n_rb=s.n_rb,
            n_ei=s.n_ei,
            wall_time=s.wall_time,
            max_estimate=s.max_estimate,
            max_true_error=s.max_true_error,
            termination=s.termination,
            delta_iterations=s.iterations - base.iterations,
            delta_n_ei=s.n_ei - base.n_ei,
            delta_wall_time=s.wall_time - base.wall_time,
        )
        for s in summaries
    ]

    curves = []
    for summary, run_dir in zip(summaries, run_dirs, strict=True):
        log = Path(run_dir) / ITERATIONS_FILE
        if not log.exists():
            continue
        for row in read_iterations(log):
            curves.append({"run": summary.name, **{c: row[c] for c in CONVERGENCE_COLUMNS[1:]}})

    return RunComparison(model=base.model, rows=rows, curves=curves)


def write_comparison(comparison: RunComparison, output: Path) -> list[Path]:
    """
    Write comparison.csv, comparison.json and convergence.csv.

    Returns:
        The written paths
    """
    output = Path(output)
    output.mkdir(parents=True, exist_ok=True)

    table = output / COMPARISON_CSV
    columns = list(asdict(comparison.rows[0]))
    with open(table, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for row in comparison.rows:
            writer.writerow({k: "" if v is None else v for k, v in asdict(row).items()})

    curves = output / CONVERGENCE_CSV
    with open(curves, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CONVERGENCE_COLUMNS)
        writer.writeheader()
        writer.writerows(comparison.curves)

    return [table, write_json_atomic(output / COMPARISON_JSON, comparison.to_dict()), curves]
