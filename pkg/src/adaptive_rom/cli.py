"""Command-line interface for adaptive-rom."""

import functools
import sys
from pathlib import Path

import click

from . import __version__, ui
from .compare import compare_runs, write_comparison
from .config import (
    ADAPTIVE,
    FOM_SIM,
    INFSUP,
    STANDARD,
    STANDARD_DEIM,
    TEMPLATES,
    TWOWAY,
    ExperimentConfig,
)
from .errors import ConfigError, RomError
from .manifest import load_manifest, load_rom
from .matrix_io import export_csv
from .models import build_model
from .reduction import simulate_rom
from .runner import run_dir_for, run_experiment
from .ui import console, show_error, show_info, show_success, show_warning

EXIT_NOT_ACCEPTED = 2


@click.group(invoke_without_command=True)
@click.option("--version", is_flag=True, help="Show version and exit")
@click.option("--verbose", "-v", is_flag=True, help="Show debug output")
@click.pass_context
def cli(ctx, version, verbose):
    """Adaptive ROM - adaptive POD-Greedy-(D)EIM model order reduction.

    Each command reads an experiment file (see 'adaptive-rom init-config')
    and writes its artifacts to <output>/<name>/.
    """
    if version:
        console.print(f"adaptive-rom version {__version__}")
        ctx.exit(0)
    if verbose:
        ui.set_verbose(True)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


def run_options(fn):
    """Overrides shared by every experiment command."""

    @click.argument("config", type=click.Path(exists=True, dir_okay=False))
    @click.option("--tol", type=float, default=None, help="Output error tolerance")
    @click.option("--max-iter", type=int, default=None, help="Maximum greedy iterations")
    @click.option("--seed", type=int, default=None, help="Seed for the initial parameter")
    @click.option("--jobs", "-j", type=int, default=None, help="Workers for training-set sweeps")
    @click.option("--output", "-o", type=click.Path(), default=None, help="Output directory")
    @click.option("--verbose", "-v", is_flag=True, help="Show debug output")
    @functools.wraps(fn)
    def wrapper(*args, verbose: bool, **kwargs):
        if verbose:
            ui.set_verbose(True)
        return fn(*args, **kwargs)

    return wrapper


def _execute(config: str, pipeline: str, **overrides) -> None:
    """Load, override, validate and run one experiment, then exit with its status."""
    try:
        cfg = ExperimentConfig.load(Path(config)).with_overrides(pipeline=pipeline, **overrides)

        errors = cfg.validate()
        if errors:
            show_error("Configuration validation failed:")
            for error in errors:
                console.print(f"  - {error}")
            raise click.ClickException("Invalid configuration")

        summary = run_experiment(cfg)
        ui.show_run_summary(summary)

    except FileNotFoundError as e:
        show_error(str(e))
        raise click.ClickException("Configuration file not found")
    except (ConfigError, RomError) as e:
        show_error(str(e))
        raise click.ClickException(str(e))

    if summary.failure:
        raise click.ClickException(summary.failure)
    if not summary.accepted:
        show_warning(f"Run ended with '{summary.termination}'")
        sys.exit(EXIT_NOT_ACCEPTED)
    show_success(f"Artifacts written to {run_dir_for(cfg)}")


@cli.command("init-config")
@click.option(
    "--model",
    "-m",
    type=click.Choice(sorted(TEMPLATES)),
    default="burgers",
    help="Model the template is for",
)
@click.option("--output", "-o", type=click.Path(), default=None, help="Output path (default: <model>.yaml)")
@click.option("--force", "-f", is_flag=True, help="Overwrite existing config")
def init_config_cmd(model: str, output: str | None, force: bool):
    """Create a template experiment file."""
    try:
        config_path = Path(output) if output else Path(f"{model}.yaml")

        if config_path.exists() and not force:
            show_error(f"Config file already exists: {config_path}")
            show_info("Use --force to overwrite")
            return

        template = ExperimentConfig.create_template(model)

        config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(config_path, "w") as f:
            f.write(template)

        show_success(f"Created config file: {config_path}")
        show_info("Edit this file to configure the experiment")

    except Exception as e:
        show_error(f"Failed to create config: {e}")
        raise click.ClickException(str(e))


@cli.command("fom-sim")
@run_options
def fom_sim_cmd(config: str, **overrides):
    """Simulate the full-order model at every training point."""
    _execute(config, FOM_SIM, **overrides)


@cli.command("greedy")
@run_options
@click.option("--deim/--no-deim", default=True, help="Interpolate the nonlinearity (default) or project it exactly")
@click.option("--method", type=click.Choice(["EIM", "DEIM"]), default=None, help="Interpolation method")
def greedy_cmd(config: str, deim: bool, **overrides):
    """Run the standard (non-adaptive) POD-Greedy."""
    _execute(config, STANDARD_DEIM if deim else STANDARD, **overrides)


@cli.command("adaptive")
@run_options
@click.option("--method", type=click.Choice(["EIM", "DEIM"]), default=None, help="Interpolation method")
def adaptive_cmd(config: str, **overrides):
    """Run the adaptive POD-Greedy-(D)EIM."""
    _execute(config, ADAPTIVE, **overrides)


@cli.command("twoway")
@run_options
@click.option("--method", type=click.Choice(["EIM", "DEIM"]), default=None, help="Interpolation method")
def twoway_cmd(config: str, **overrides):
    """Adapt both basis sizes of a non-parametric model."""
    _execute(config, TWOWAY, **overrides)


@cli.command("infsup")
@run_options
def infsup_cmd(config: str, **overrides):
    """Build the inf-sup surrogate and check it against direct σ_min."""
    _execute(config, INFSUP, **overrides)


@cli.command("compare")
@click.argument("runs", nargs=-1, type=click.Path(exists=True, file_okay=False))
@click.option("--output", "-o", type=click.Path(), default="comparison", help="Output directory")
def compare_cmd(runs: tuple[str, ...], output: str):
    """Compare two or more finished runs of the same model."""
    try:
        comparison = compare_runs([Path(r) for r in runs])
        ui.show_comparison(comparison)
        written = write_comparison(comparison, Path(output))
        show_success(f"Wrote {len(written)} file(s) to {output}")

    except FileNotFoundError as e:
        show_error(str(e))
        raise click.ClickException("Run summary not found")
    except RomError as e:
        show_error(str(e))
        raise click.ClickException(str(e))


@cli.command("reload")
@click.argument("run", type=click.Path(exists=True, file_okay=False))
@click.option("--mu", type=float, multiple=True, help="Parameter coordinate (repeat per axis)")
@click.option("--output", "-o", type=click.Path(), default=None, help="Write ROM outputs to this CSV")
def reload_cmd(run: str, mu: tuple[float, ...], output: str | None):
    """Rebuild the final ROM of a run and simulate it."""
    try:
        manifest = load_manifest(Path(run))
        fom = build_model(ExperimentConfig.from_dict(manifest.config).model)
        rom = load_rom(Path(run), fom)
        point = fom.domain.point(*mu)
        trajectory = simulate_rom(rom, point, raise_on_instability=True)

        show_info(f"ROM (l_RB, l_EI) = ({rom.n_rb}, {rom.n_ei}) at mu = {ui.format_mu(point.coords)}")
        final = trajectory.outputs[:, -1]
        show_success("final outputs: " + ", ".join(ui.format_value(float(y)) for y in final))
        if output:
            export_csv(Path(output), trajectory.outputs.T, [f"y{j}" for j in range(final.size)])
            show_info(f"Wrote {output}")

    except FileNotFoundError as e:
        show_error(str(e))
        raise click.ClickException("Run manifest not found")
    except RomError as e:
        show_error(str(e))
        raise click.ClickException(str(e))


def main():
    """Entry point for CLI."""
    cli()


if __name__ == "__main__":
    main()
