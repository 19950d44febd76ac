"""Experiment configuration for adaptive-rom."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, fields
from importlib.resources import files
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError, InvalidInputError
from .greedy import GreedyConfig
from .infsup import DEFAULT_MAX_CENTERS, DEFAULT_TOL_CHANGE, KERNELS, THIN_PLATE
from .models import MODEL_IDS, ChromatographyCoefficients

FOM_SIM = "fom-sim"
STANDARD = "standard"
STANDARD_DEIM = "standard-deim"
ADAPTIVE = "adaptive-greedy"
TWOWAY = "twoway"
INFSUP = "infsup-validate"
PIPELINES = (FOM_SIM, STANDARD, STANDARD_DEIM, ADAPTIVE, TWOWAY, INFSUP)

SAMPLINGS = ("uniform", "log-uniform", "explicit")
TEMPLATES = {model_id: f"{model_id}.yaml" for model_id in MODEL_IDS}


@dataclass
class ModelConfig:
    """Which full-order model to assemble and how."""

    id: str
    size: int
    dt: float | None = None
    horizon: tuple[float, float] = (0.0, 2.0)
    domain: list[list[float]] = field(default_factory=list)
    snapshot_stride: int = 10
    time_step: dict[str, float] = field(default_factory=dict)
    coefficients: dict[str, float] = field(default_factory=dict)
    coefficient_set: str | None = None
    coefficients_file: str | None = None
    horizon_factor: float = 1.5
    source: float = 10.0


@dataclass
class TrainingConfig:
    """Training set Ξ."""

    sampling: str = "uniform"
    counts: list[int] = field(default_factory=list)
    points: list[list[float]] = field(default_factory=list)


@dataclass
class InfSupConfig:
    """RBF surrogate settings for σ_min(Ẽ(μ))."""

    kernel: str = THIN_PLATE
    n_coarse: int | None = None
    tol_change: float = DEFAULT_TOL_CHANGE
    max_centers: int = DEFAULT_MAX_CENTERS


@dataclass
class TwowayConfig:
    """Extra outputs of two-way runs."""

    landscape_rb: list[int] = field(default_factory=list)
    landscape_ei: list[int] = field(default_factory=list)


@dataclass
class ExperimentConfig:
    """One experiment: a model, a training set, a pipeline and its settings."""

    name: str
    pipeline: str
    model: ModelConfig
    training: TrainingConfig = field(default_factory=TrainingConfig)
    greedy: GreedyConfig = field(default_factory=GreedyConfig)
    infsup: InfSupConfig = field(default_factory=InfSupConfig)
    twoway: TwowayConfig = field(default_factory=TwowayConfig)
    validation_points: int = 0
    overlay: list[list[float]] = field(default_factory=list)
    output: Path = Path("runs")
    coefficient_sets: dict[str, dict[str, float]] = field(default_factory=dict)

    @classmethod
    def load(cls, config_path: Path) -> ExperimentConfig:
        """
        Load an experiment from a YAML file.

        Args:
            config_path: Path to the experiment file

        Returns:
            ExperimentConfig

        Raises:
            FileNotFoundError: If the file doesn't exist
            ConfigError: If the file is malformed
        """
        config_path = Path(config_path)
        if not config_path.exists():
            raise FileNotFoundError(
                f"Config file not found: {config_path}\n"
                f"Create one using: adaptive-rom init-config"
            )

        with open(config_path) as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigError("<file>", f"invalid YAML: {e}")
        if not isinstance(data, dict):
            raise ConfigError("<file>", "top level must be a mapping")

        return cls.from_dict(data, base_dir=config_path.parent)

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
        """
        Create an ExperimentConfig from a dictionary.

        coefficients_file is resolved relative to base_dir (the config's
        directory when loaded from disk).
        """
        for key in ("name", "pipeline", "model"):
            if key not in data:
                raise ConfigError(key, "missing required field")

        coefficient_sets = {
            name: dict(values) for name, values in (data.get("coefficient_sets") or {}).items()
        }

        model_data = dict(data["model"])
        _check_keys("model", model_data, ModelConfig)
        if "id" not in model_data or "size" not in model_data:
            raise ConfigError("model", "needs 'id' and 'size'")
        if "horizon" in model_data:
            model_data["horizon"] = tuple(float(t) for t in model_data["horizon"])
        model = ModelConfig(**model_data)

        # Merge referenced coefficient blocks; explicit values win
        merged: dict[str, float] = {}
        if model.coefficients_file:
            resolved = _resolve(model.coefficients_file, base_dir)
            merged.update(_read_coefficients_file(resolved))
            model.coefficients_file = str(resolved)
        if model.coefficient_set:
            if model.coefficient_set not in coefficient_sets:
                raise ConfigError(
                    "model.coefficient_set",
                    f"references unknown coefficient set '{model.coefficient_set}'",
                )
            merged.update(coefficient_sets[model.coefficient_set])
        merged.update(model.coefficients)
        model.coefficients = merged

        training_data = dict(data.get("training") or {})
        _check_keys("training", training_data, TrainingConfig)
        training = TrainingConfig(**training_data)

        try:
            greedy = GreedyConfig.from_dict(dict(data.get("greedy") or {}))
        except (InvalidInputError, TypeError) as e:
            raise ConfigError("greedy", str(e))

        infsup_data = dict(data.get("infsup") or {})
        _check_keys("infsup", infsup_data, InfSupConfig)
        twoway_data = dict(data.get("twoway") or {})
        _check_keys("twoway", twoway_data, TwowayConfig)

        return cls(
            name=str(data["name"]),
            pipeline=str(data["pipeline"]),
            model=model,
            training=training,
            greedy=greedy,
            infsup=InfSupConfig(**infsup_data),
            twoway=TwowayConfig(**twoway_data),
            validation_points=int(data.get("validation_points", 0)),
            overlay=[list(map(float, p)) for p in data.get("overlay") or []],
            output=Path(data.get("output", "runs")).expanduser(),
            coefficient_sets=coefficient_sets,
        )

    def validate(self) -> list[str]:
        """
        Validate the configuration.

        Returns:
            List of validation errors (empty if valid)
        """
        errors = []

        if self.pipeline not in PIPELINES:
            errors.append(f"pipeline: unknown pipeline '{self.pipeline}' (known: {', '.join(PIPELINES)})")

        m = self.model
        if m.id not in MODEL_IDS:
            errors.append(f"model.id: unknown model '{m.id}' (known: {', '.join(MODEL_IDS)})")
        if m.size < 3:
            errors.append(f"model.size: must be >= 3, got {m.size}")
        if m.dt is not None and not m.dt > 0:
            errors.append(f"model.dt: must be positive, got {m.dt}")
        if m.dt is None and m.id != "chromatography":
            errors.append("model.dt: required for this model")
        if not m.horizon[1] > m.horizon[0]:
            errors.append(f"model.horizon: end must exceed start, got {list(m.horizon)}")
        if m.snapshot_stride < 1:
            errors.append(f"model.snapshot_stride: must be >= 1, got {m.snapshot_stride}")
        expected_dim = {"burgers": 1, "chromatography": 2, "synthetic-rd": 0}.get(m.id)
        if expected_dim is not None and len(m.domain) != expected_dim:
            errors.append(f"model.domain: '{m.id}' has {expected_dim} parameter(s), got {len(m.domain)}")
        for i, bounds in enumerate(m.domain):
            if len(bounds) != 2:
                errors.append(f"model.domain[{i}]: expected [lower, upper]")
            elif not bounds[1] >= bounds[0]:
                errors.append(f"model.domain[{i}]: upper bound below lower bound")
        if m.id == "chromatography" and (m.size < 12 or m.size % 4):
            errors.append(f"model.size: chromatography needs a multiple of 4, >= 12, got {m.size}")
        if m.id == "chromatography" and m.coefficients:
            try:
                ChromatographyCoefficients.from_dict(m.coefficients, complete=False)
            except InvalidInputError as e:
                errors.append(f"model.coefficients: {e}")

        t = self.training
        if t.sampling not in SAMPLINGS:
            errors.append(f"training.sampling: must be one of {', '.join(SAMPLINGS)}")
        elif t.sampling == "explicit":
            if not t.points:
                errors.append("training.points: explicit sampling needs at least one point")
        elif len(t.counts) != len(m.domain):
            errors.append(
                f"training.counts: need one count per parameter ({len(m.domain)}), got {len(t.counts)}"
            )
        elif any(c < 1 for c in t.counts):
            errors.append("training.counts: counts must be >= 1")

        errors.extend(self.greedy.validate())

        if self.infsup.kernel not in KERNELS:
            errors.append(f"infsup.kernel: must be one of {', '.join(KERNELS)}")
        if not self.infsup.tol_change > 0:
            errors.append("infsup.tol_change: must be positive")
        if self.infsup.max_centers < 1:
            errors.append("infsup.max_centers: must be >= 1")

        if self.pipeline == TWOWAY and m.domain:
            errors.append("pipeline: 'twoway' needs a non-parametric model")
        if self.validation_points < 0:
            errors.append("validation_points: must be >= 0")
        for i, point in enumerate(self.overlay):
            if len(point) != len(m.domain):
                errors.append(f"overlay[{i}]: expected {len(m.domain)} coordinate(s)")

        return errors

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary that from_dict turns back into an equal config."""
        model = asdict(self.model)
        model["horizon"] = list(self.model.horizon)
        return {
            "name": self.name,
            "pipeline": self.pipeline,
            "model": model,
            "training": asdict(self.training),
            "greedy": self.greedy.to_dict(),
            "infsup": asdict(self.infsup),
            "twoway": asdict(self.twoway),
            "validation_points": self.validation_points,
            "overlay": [list(p) for p in self.overlay],
            "output": str(self.output),
            "coefficient_sets": dict(self.coefficient_sets),
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def config_hash(self) -> str:
        """sha256 of the canonical YAML dump."""
        return "sha256:" + hashlib.sha256(self.dump().encode()).hexdigest()

    def with_overrides(self, **overrides: Any) -> ExperimentConfig:
        """
        Copy with command-line overrides applied.

        Keys tol, max_iter, seed, jobs, method go to the greedy section;
        output and pipeline replace the top-level fields. None values are
        ignored.
        """
        data = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("tol", "max_iter", "seed", "jobs", "method"):
                data["greedy"][key] = value
            elif key in ("output", "pipeline"):
                data[key] = str(value)
            else:
                raise InvalidInputError(f"unknown override '{key}'")
        return ExperimentConfig.from_dict(data)

    @staticmethod
    def create_template(model_id: str) -> str:
        """
        Template experiment for a model.

        Reads from the bundled templates directory.
        """
        if model_id not in TEMPLATES:
            raise InvalidInputError(f"no template for model '{model_id}'")
        try:
            return files("adaptive_rom.templates").joinpath(TEMPLATES[model_id]).read_text()
        except (FileNotFoundError, ModuleNotFoundError):
            template_path = Path(__file__).parent / "templates" / TEMPLATES[model_id]
            if template_path.exists():
                return template_path.read_text()
            raise FileNotFoundError(
                f"Could not find {TEMPLATES[model_id]} template file. Please reinstall the package."
            )


def _check_keys(section: str, data: dict[str, Any], kind: type) -> None:
    known = {f.name for f in fields(kind)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(section, f"unknown key(s): {', '.join(unknown)}")


def _resolve(path: str, base_dir: Path | None) -> Path:
    resolved = Path(path).expanduser()
    if not resolved.is_absolute() and base_dir is not None:
        resolved = base_dir / resolved
    return resolved.absolute()


def _read_coefficients_file(resolved: Path) -> dict[str, float]:
    if not resolved.exists():
        raise ConfigError("model.coefficients_file", f"file not found: {resolved}")
    with open(resolved) as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError("model.coefficients_file", "must contain a mapping")
    return dict(data)
