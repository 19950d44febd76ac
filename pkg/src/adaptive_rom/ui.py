"""Console output for adaptive-rom using rich."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

from rich.console import Console
from rich.table import Table

from .utils import format_duration

if TYPE_CHECKING:
    from .compare import RunComparison
    from .greedy import IterationRecord
    from .summary import RunSummary

console = Console()

_verbose = False


def set_verbose(enabled: bool) -> None:
    """Enable or disable debug output."""
    global _verbose
    _verbose = enabled


def show_error(message: str) -> None:
    """
    Display an error message.

    Args:
        message: Error message
    """
    console.print(f"[bold red]ERROR:[/bold red] {message}")


def show_warning(message: str) -> None:
    """
    Display a warning message.

    Args:
        message: Warning message
    """
    console.print(f"[bold yellow]WARNING:[/bold yellow] {message}")


def show_success(message: str) -> None:
    """
    Display a success message.

    Args:
        message: Success message
    """
    console.print(f"[bold green]✓[/bold green] {message}")


def show_info(message: str) -> None:
    """
    Display an info message.

    Args:
        message: Info message
    """
    console.print(f"[blue]ℹ[/blue] {message}")


def show_debug(message: str) -> None:
    """Display a message only in verbose mode."""
    if _verbose:
        console.print(f"[dim]· {message}[/dim]")


def format_value(value: float | None, digits: int = 3) -> str:
    """Format a float for tables, keeping sentinels readable."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    if math.isinf(value):
        return "inf"
    return f"{value:.{digits}e}"


def format_mu(mu: tuple[float, ...]) -> str:
    if not mu:
        return "()"
    return "(" + ", ".join(f"{c:.4g}" for c in mu) + ")"


def show_iteration(record: IterationRecord) -> None:
    """
    Print a one-line progress report for a greedy iteration.

    Args:
        record: Iteration record just appended to the greedy state
    """
    console.print(
        f"[cyan]iter {record.iteration:>3}[/cyan] "
        f"mu*={format_mu(record.mu)} "
        f"(l_RB, l_EI)=({record.n_rb}, {record.n_ei}) "
        f"est={format_value(record.est_total)} "
        f"[dim]rb={format_value(record.est_rb)} ei={format_value(record.est_ei)} "
        f"rho={format_value(record.rho_bar)} max={format_value(record.est_max)}[/dim]"
    )


def show_run_summary(summary: RunSummary) -> None:
    """
    Display the outcome of an experiment run.

    Args:
        summary: Completed run summary
    """
    status_style = "green" if summary.status == "ok" else "red"
    table = Table(title=f"Run {summary.name} ({summary.pipeline})", show_header=True)
    table.add_column("Field", style="cyan")
    table.add_column("Value", style="yellow", justify="right")

    table.add_row("Model", summary.model)
    table.add_row("Status", f"[{status_style}]{summary.status}[/{status_style}]")
    table.add_row("Termination", summary.termination or "-")
    table.add_row("Iterations", str(summary.iterations))
    table.add_row("(l_RB, l_EI)", f"({summary.n_rb}, {summary.n_ei})")
    table.add_row("FOM solves", str(summary.fom_solves))
    table.add_row("Max estimated error", format_value(summary.max_estimate))
    table.add_row("Max true error", format_value(summary.max_true_error))
    table.add_row("Wall time", format_duration(summary.wall_time))

    if summary.timings:
        table.add_section()
        for phase, seconds in summary.timings.items():
            table.add_row(f"[dim]{phase}[/dim]", format_duration(seconds))

    if summary.failure:
        table.add_section()
        table.add_row("[bold red]Failure[/bold red]", summary.failure)

    console.print(table)


def show_comparison(comparison: RunComparison) -> None:
    """
    Display an aligned comparison of several runs.

    Args:
        comparison: Comparison built from run summaries
    """
    table = Table(title=f"Comparison ({comparison.model})", show_header=True)
    table.add_column("Run", style="cyan")
    table.add_column("Pipeline", style="magenta")
    table.add_column("Iterations", justify="right")
    table.add_column("(l_RB, l_EI)", justify="right")
    table.add_column("Wall time", justify="right")
    table.add_column("Max est.", justify="right")
    table.add_column("Max true", justify="right")
    table.add_column("Δ iterations", style="yellow", justify="right")
    table.add_column("Δ l_EI", style="yellow", justify="right")

    for row in comparison.rows:
        table.add_row(
            row.name,
            row.pipeline,
            str(row.iterations),
            f"({row.n_rb}, {row.n_ei})",
            f"{row.wall_time:.1f} s",
            format_value(row.max_estimate),
            format_value(row.max_true_error),
            f"{row.delta_iterations:+d}",
            f"{row.delta_n_ei:+d}",
        )

    console.print(table)
