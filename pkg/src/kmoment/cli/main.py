"""CLI entry points for kmoment."""

import os
from pathlib import Path
from typing import Callable, Optional

import typer
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel

from kmoment import __version__
from kmoment.core.config import GridSpec, load_settings
from kmoment.core.errors import KMomentError

# Diagnostics go to stderr; stdout carries only the certificate
console = Console(stderr=True)

app = typer.Typer(
    name="kmoment",
    help="kmoment: certificates for truncated moment problems on polynomial algebras",
    add_completion=False,
)

PSD_TOL = typer.Option(None, "--psd-tol", help="PSD tolerance relative to ||M||_2.")
RANK_TOL = typer.Option(None, "--rank-tol", help="Rank cutoff relative to sigma_max.")
DEPTH = typer.Option(None, "--depth", help="Maximum number of one-step extensions.")
SEED = typer.Option(None, "--seed", help="Seed for atom extraction.")
PROBABILITY = typer.Option(
    None, "--probability/--no-probability", help="Normalize the total mass before solving."
)
ATOMS_CSV = typer.Option(None, "--atoms-csv", help="Write the atom table to this CSV file.")


def _version_callback(value: bool) -> None:
    """Print version and exit if --version flag is used."""
    if value:
        console.print(f"kmoment v{__version__}")
        raise typer.Exit()


def _run(command: Callable[[], int]) -> None:
    """Run a command, mapping structural errors to exit code 1."""
    try:
        code = command()
    except KMomentError as e:
        console.print(f"[bold red]Error: {escape(str(e))}[/bold red]")
        raise typer.Exit(code=1)
    if code != 0:
        raise typer.Exit(code=code)


@app.callback()
def callback(
    version: bool = typer.Option(
        None,
        "--version",
        "-V",
        help="Show the version and exit.",
        callback=_version_callback,
        is_eager=True,
    ),
    verbose: bool = typer.Option(
        False, "--verbose", "-v", help="Print per-stage progress."
    ),
) -> None:
    """kmoment: certificates for truncated moment problems on polynomial algebras."""
    # Set verbosity in environment for other components to access
    if verbose:
        os.environ["KMOMENT_VERBOSE"] = "1"


@app.command()
def check(
    problem: Path = typer.Argument(..., help="Problem file (JSON)"),
    psd_tol: Optional[float] = PSD_TOL,
    rank_tol: Optional[float] = RANK_TOL,
) -> None:
    """Report moment-matrix, localizing and consistency checks without extending."""
    from kmoment.commands.check import check_problem

    settings = load_settings()
    _run(lambda: check_problem(problem, settings, psd_tol=psd_tol, rank_tol=rank_tol))


@app.command()
def solve(
    problem: Path = typer.Argument(..., help="Problem file (JSON)"),
    psd_tol: Optional[float] = PSD_TOL,
    rank_tol: Optional[float] = RANK_TOL,
    depth: Optional[int] = DEPTH,
    seed: Optional[int] = SEED,
    probability: Optional[bool] = PROBABILITY,
    atoms_csv: Optional[Path] = ATOMS_CSV,
) -> None:
    """Decide representability and extract a representing measure.

    Exit code 0 means representable, 2 a failure verdict, 1 a malformed input.
    """
    from kmoment.commands.solve import solve_problem

    settings = load_settings()
    _run(
        lambda: solve_problem(
            problem,
            settings,
            atoms_csv,
            psd_tol=psd_tol,
            rank_tol=rank_tol,
            depth=depth,
            seed=seed,
            probability=probability,
        )
    )


@app.command()
def extract(
    problem: Path = typer.Argument(..., help="Problem file (JSON) with flat data"),
    rank_tol: Optional[float] = RANK_TOL,
    seed: Optional[int] = SEED,
    atoms_csv: Optional[Path] = ATOMS_CSV,
) -> None:
    """Extract atoms from data whose moment matrix is already flat."""
    from kmoment.commands.extract import extract_problem

    settings = load_settings()
    _run(lambda: extract_problem(problem, settings, atoms_csv, rank_tol=rank_tol, seed=seed))


@app.command()
def dominate(
    alpha: Optional[str] = typer.Argument(None, help="Exponent vector, e.g. 3 or 1,1"),
    space: Optional[int] = typer.Option(None, "--space", "-k", help="Dominate every monomial up to this degree."),
    nvars: int = typer.Option(1, "--nvars", "-n", help="Number of variables for --space."),
    grid: Optional[str] = typer.Option(None, "--grid", help="Verification grid 'lo,hi,steps per axis'."),
) -> None:
    """Build a dominating polynomial and verify it on a grid."""
    from kmoment.commands.dominate import dominate_command

    settings = load_settings()

    def command() -> int:
        try:
            spec = GridSpec.parse(grid) if grid else GridSpec(lo=-10.0, hi=10.0, steps=settings.grid_steps)
        except ValueError as e:
            raise KMomentError(str(e)) from e
        return dominate_command(alpha, space, nvars, spec)

    _run(command)


@app.command()
def scp(
    weights: Path = typer.Argument(..., help="Weight diagram file (JSON)"),
    kmax: Optional[int] = typer.Option(None, "--kmax", help="Moment degree to complete through."),
    psd_tol: Optional[float] = PSD_TOL,
    rank_tol: Optional[float] = RANK_TOL,
    depth: Optional[int] = DEPTH,
    seed: Optional[int] = SEED,
) -> None:
    """Complete a 2-variable weight diagram to a subnormal weighted shift."""
    from kmoment.commands.scp import scp_command

    settings = load_settings()
    _run(
        lambda: scp_command(
            weights, settings, kmax, psd_tol=psd_tol, rank_tol=rank_tol, depth=depth, seed=seed
        )
    )


@app.command()
def frame(
    problem: Path = typer.Argument(..., help="Frame file (JSON) with nested levels"),
    psd_tol: Optional[float] = PSD_TOL,
    rank_tol: Optional[float] = RANK_TOL,
    depth: Optional[int] = DEPTH,
    seed: Optional[int] = SEED,
) -> None:
    """Solve nested truncations and compare the recovered measures."""
    from kmoment.commands.frame import frame_command

    settings = load_settings()
    _run(lambda: frame_command(problem, settings, psd_tol=psd_tol, rank_tol=rank_tol, depth=depth, seed=seed))


if __name__ == "__main__":
    # Show welcome banner when run directly
    console.print(
        Panel.fit(
            f"[bold green]kmoment[/bold green] v{__version__}\n"
            "[dim]Certificates for truncated moment problems[/dim]",
            border_style="green",
        )
    )

    # Run the CLI app
    app()
