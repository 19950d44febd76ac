"""Persisting and reloading the final reduced model of a run."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any

import numpy as np

from . import ui
from .config import ExperimentConfig
from .errors import InvalidInputError
from .greedy import GreedyState
from .infsup import InfSupSurrogate
from .interpolation import InterpBasis
from .matrix_io import compute_checksum, read_json, read_matrix, write_json_atomic, write_matrix
from .models import SemiImplicitFom, build_model
from .reduction import ReducedBasis, ReducedModel, project_rom

MANIFEST_FILE = "manifest.json"
BASIS_FILE = "V.bin"
INTERP_FILE = "U_f.bin"
DUAL_FILE = "V_du.bin"


@dataclass
class BasisFile:
    """One persisted matrix."""

    file: str
    rows: int
    cols: int
    checksum: str


@dataclass
class RomManifest:
    """Everything needed to rebuild the final ROM without re-running greedy."""

    timestamp: str
    model: str
    config_hash: str
    config: dict[str, Any]
    basis: BasisFile
    provenance: list[list[Any]] = field(default_factory=list)
    interp: BasisFile | None = None
    indices: list[int] = field(default_factory=list)
    method: str | None = None
    dual_basis: BasisFile | None = None
    rho_bar: float = 1.0
    surrogate: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for JSON serialisation."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RomManifest:
        """Create from dictionary."""

        def _file(entry: dict[str, Any] | None) -> BasisFile | None:
            return BasisFile(**entry) if entry else None

        return cls(
            timestamp=data["timestamp"],
            model=data["model"],
            config_hash=data["config_hash"],
            config=data["config"],
            basis=BasisFile(**data["basis"]),
            provenance=data.get("provenance", []),
            interp=_file(data.get("interp")),
            indices=list(data.get("indices", [])),
            method=data.get("method"),
            dual_basis=_file(data.get("dual_basis")),
            rho_bar=float(data.get("rho_bar", 1.0)),
            surrogate=data.get("surrogate"),
        )


def _store(run_dir: Path, name: str, matrix: np.ndarray) -> BasisFile:
    path = write_matrix(run_dir / name, matrix)
    return BasisFile(name, matrix.shape[0], matrix.shape[1], compute_checksum(path))


def save_rom(run_dir: Path, state: GreedyState, cfg: ExperimentConfig) -> Path:
    """
    Write V, U_f, ℘, the dual basis and the surrogate of a finished run.

    Args:
        run_dir: Run directory
        state: Final greedy state
        cfg: Experiment configuration of the run

    Returns:
        Path to manifest.json
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    manifest = RomManifest(
        timestamp=datetime.now().isoformat(),
        model=cfg.model.id,
        config_hash=cfg.config_hash(),
        config=cfg.to_dict(),
        basis=_store(run_dir, BASIS_FILE, state.basis.V),
        provenance=[[list(mu) if mu is not None else None, j] for mu, j in state.basis.provenance],
        rho_bar=state.rho_bar,
    )
    if state.interp is not None:
        manifest.interp = _store(run_dir, INTERP_FILE, state.interp.U)
        manifest.indices = list(state.interp.indices)
        manifest.method = state.interp.method
    if state.dual_basis is not None and state.dual_basis.shape[1]:
        manifest.dual_basis = _store(run_dir, DUAL_FILE, state.dual_basis)
    if state.surrogate is not None:
        manifest.surrogate = state.surrogate.to_dict()

    return write_json_atomic(run_dir / MANIFEST_FILE, manifest.to_dict())


def load_manifest(run_dir: Path) -> RomManifest:
    """
    Read manifest.json of a run directory.

    Raises:
        FileNotFoundError: If the run has no manifest
    """
    path = Path(run_dir) / MANIFEST_FILE
    if not path.exists():
        raise FileNotFoundError(f"No ROM manifest found: {path}")
    return RomManifest.from_dict(read_json(path))


def _load(run_dir: Path, entry: BasisFile) -> np.ndarray:
    path = run_dir / entry.file
    if not path.exists():
        raise FileNotFoundError(f"Basis file missing: {path}")
    checksum = compute_checksum(path)
    if checksum != entry.checksum:
        raise InvalidInputError(f"{entry.file}: checksum mismatch ({checksum} != {entry.checksum})")
    matrix = read_matrix(path)
    if matrix.shape != (entry.rows, entry.cols):
        raise InvalidInputError(f"{entry.file}: expected {entry.rows}×{entry.cols}, got {matrix.shape}")
    return matrix


def load_rom(run_dir: Path, fom: SemiImplicitFom | None = None) -> ReducedModel:
    """
    Rebuild the final ROM of a run from its persisted bases.

    Args:
        run_dir: Run directory holding manifest.json
        fom: Full-order model; assembled from the stored configuration when None

    Returns:
        ReducedModel projected from the stored V and U_f, ℘

    Raises:
        FileNotFoundError: Missing manifest or basis file
        InvalidInputError: Checksum or shape mismatch, or a FOM of another size
    """
    run_dir = Path(run_dir)
    manifest = load_manifest(run_dir)
    if fom is None:
        fom = build_model(ExperimentConfig.from_dict(manifest.config).model)

    V = _load(run_dir, manifest.basis)
    provenance = tuple(
        (tuple(mu) if mu is not None else None, int(j)) for mu, j in manifest.provenance
    )
    basis = ReducedBasis(V, provenance)
    interp = None
    if manifest.interp is not None:
        interp = InterpBasis(_load(run_dir, manifest.interp), tuple(manifest.indices), manifest.method)
    ui.show_debug(f"loaded ROM ({basis.rank}, {interp.size if interp else 0}) from {run_dir}")
    return project_rom(fom, basis, interp)


def load_surrogate(run_dir: Path) -> InfSupSurrogate | None:
    """The σ_min surrogate stored with a run, if any."""
    manifest = load_manifest(run_dir)
    return InfSupSurrogate.from_dict(manifest.surrogate) if manifest.surrogate else None
