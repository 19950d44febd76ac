"""Run summaries and the per-iteration convergence log."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any

from .errors import InvalidInputError
from .greedy import IterationRecord
from .matrix_io import compute_checksum, read_json, write_json_atomic

SCHEMA_VERSION = 1
SUMMARY_FILE = "summary.json"
ITERATIONS_FILE = "iterations.csv"

ITERATION_COLUMNS = (
    "iteration",
    "mu",
    "n_rb",
    "n_ei",
    "rb_increment",
    "est_rb",
    "est_ei",
    "est_total",
    "est_max",
    "true_error",
    "rho_bar",
    "eff_original",
    "eff_modified",
    "wall_time",
)

OK = "ok"
NOT_CONVERGED = "not-converged"
FAILED = "failed"


@dataclass
class RunSummary:
    """Outcome of one experiment run, written as summary.json."""

    name: str
    pipeline: str
    model: str
    config_hash: str
    host_id: str
    started: str  # ISO format datetime
    status: str = OK
    termination: str | None = None
    iterations: int = 0
    n_rb: int = 0
    n_ei: int = 0
    fom_solves: int = 0
    max_estimate: float | None = None
    max_true_error: float | None = None
    rho_bar: float | None = None
    wall_time: float = 0.0
    timings: dict[str, float] = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)  # name -> checksum
    failure: str | None = None
    schema_version: int = SCHEMA_VERSION

    @property
    def accepted(self) -> bool:
        return self.status == OK

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for JSON serialisation."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunSummary:
        """Create from dictionary."""
        version = data.get("schema_version", SCHEMA_VERSION)
        if version > SCHEMA_VERSION:
            raise InvalidInputError(
                f"summary schema version {version} is newer than supported ({SCHEMA_VERSION})"
            )
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in data.items() if k in known})

    def register(self, run_dir: Path, path: Path) -> None:
        """Record an artifact with its checksum."""
        self.files[str(Path(path).relative_to(run_dir))] = compute_checksum(path)

    def save(self, run_dir: Path) -> Path:
        return write_json_atomic(Path(run_dir) / SUMMARY_FILE, self.to_dict())

    @classmethod
    def load(cls, run_dir: Path) -> RunSummary:
        """
        Load the summary of a run directory.

        Raises:
            FileNotFoundError: No summary.json in run_dir
        """
        path = Path(run_dir) / SUMMARY_FILE
        if not path.exists():
            raise FileNotFoundError(f"No run summary found: {path}")
        return cls.from_dict(read_json(path))

    def missing_files(self, run_dir: Path) -> list[str]:
        """Registered artifacts that no longer exist."""
        return [name for name in self.files if not (Path(run_dir) / name).exists()]


def new_summary(name: str, pipeline: str, model: str, config_hash: str, host_id: str) -> RunSummary:
    return RunSummary(
        name=name,
        pipeline=pipeline,
        model=model,
        config_hash=config_hash,
        host_id=host_id,
        started=datetime.now().isoformat(),
    )


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def write_iterations(path: Path, records: list[IterationRecord]) -> Path:
    """
    Write the convergence log with the fixed column order.

    Args:
        path: Destination CSV
        records: Iteration records in order

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = path.with_suffix(".tmp")
    with open(temp_file, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(ITERATION_COLUMNS)
        for record in records:
            row = record.to_row()
            writer.writerow([_cell(row[c]) for c in ITERATION_COLUMNS])
    temp_file.replace(path)
    return path


def read_iterations(path: Path) -> list[dict[str, str]]:
    """
    Read a convergence log back as rows of strings.

    Raises:
        InvalidInputError: Header differs from the documented column order
    """
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != ITERATION_COLUMNS:
            raise InvalidInputError(f"{path}: unexpected iteration log header {header}")
        return [dict(zip(ITERATION_COLUMNS, row, strict=True)) for row in reader]
