"""Frame command for kmoment.

Solves every level of a nested family of truncations and reports whether
the recovered measures agree on the moments the levels share.
"""

from pathlib import Path
from typing import Any

import typer
from rich.table import Table

from kmoment.core.certificate import build_certificate, console, print_verdict, render_certificate
from kmoment.core.config import Settings, effective_options
from kmoment.core.flat import frame_consistency
from kmoment.core.parser import load_frame


def frame_command(path: Path, settings: Settings, **overrides: Any) -> int:
    """Run the frame diagnostic; 0 when every level is representable."""
    problem = load_frame(path)
    opts = effective_options(settings, problem.options, **overrides)

    with console.status(f"[bold green]Solving {len(problem.levels)} level(s)...[/bold green]"):
        report = frame_consistency(problem.levels, problem.constraints, opts)

    code = 0 if report.all_solvable else 2
    typer.echo(render_certificate(build_certificate("frame", report.to_dict(), opts, path, code)))

    table = Table(title="Frame levels")
    table.add_column("level", justify="right")
    table.add_column("moments", justify="right")
    table.add_column("degree", justify="right")
    table.add_column("mass", justify="right")
    table.add_column("verdict")
    for k, (level, mass) in enumerate(zip(report.levels, report.masses)):
        style = "green" if level["verdict"] == "Representable" else "red"
        table.add_row(str(k), str(level["moments"]), str(level["max_degree"]), f"{mass:.10g}", level["verdict"], style=style)
    console.print(table)
    print_verdict(
        "All levels solvable" if report.all_solvable else "Some levels failed",
        report.all_solvable,
        {"shared moment discrepancy": f"{report.shared_moment_max_discrepancy:.3e}"},
    )
    return code
