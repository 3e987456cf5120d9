"""Solve command for kmoment.

Runs the full certificate pipeline on a problem file and writes the solve
certificate to standard output.
"""

from pathlib import Path
from typing import Any, Optional

import typer
from rich.console import Console

from kmoment.core.certificate import (
    atoms_table,
    build_certificate,
    print_verdict,
    render_certificate,
    write_atoms_csv,
)
from kmoment.core.config import Settings, effective_options
from kmoment.core.flat import solve_tmp
from kmoment.core.parser import load_problem

console = Console(stderr=True)


def solve_problem(
    path: Path,
    settings: Settings,
    atoms_csv: Optional[Path] = None,
    **overrides: Any,
) -> int:
    """Solve a truncated moment problem file.

    Args:
        path: Problem file
        settings: Loaded settings
        atoms_csv: Where to write the atom table, if anywhere
        overrides: CLI option overrides (None values are ignored)

    Returns:
        0 when the data is representable, 2 for any failure verdict
    """
    problem = load_problem(path)
    opts = effective_options(settings, problem.options, **overrides)

    certificate = solve_tmp(problem.gamma, problem.monomials, problem.constraints, opts, problem.hint)
    code = certificate.verdict.exit_code
    typer.echo(render_certificate(build_certificate("solve", certificate.to_dict(), opts, path, code)))

    details = {"rank": certificate.rank, "extension steps": certificate.extension_steps}
    if certificate.residual is not None:
        details["residual"] = f"{certificate.residual:.3e}"
    if certificate.witness.get("stage"):
        details["stage"] = certificate.witness["stage"]
    print_verdict(certificate.verdict.value, certificate.representable, details)
    for warning in certificate.warnings:
        console.print(f"[yellow]Warning: {warning}[/yellow]")

    if certificate.measure is not None:
        console.print(atoms_table(certificate.measure))
        if atoms_csv is not None:
            write_atoms_csv(certificate.measure, atoms_csv)
    return code
