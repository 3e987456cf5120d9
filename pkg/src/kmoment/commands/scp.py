"""Scp command for kmoment: subnormal completion of a weight diagram."""

from pathlib import Path
from typing import Any, Optional

import typer
from rich.panel import Panel

from kmoment.core.certificate import (
    atoms_table,
    build_certificate,
    console,
    print_verdict,
    render_certificate,
)
from kmoment.core.config import Settings, effective_options
from kmoment.core.parser import load_scp
from kmoment.core.scp import scp_solve, weight_diagram


def scp_command(path: Path, settings: Settings, kmax: Optional[int] = None, **overrides: Any) -> int:
    """Complete a weight diagram; 0 on a completion that extends the input, 2 otherwise."""
    problem = load_scp(path)
    opts = effective_options(settings, problem.options, **overrides)
    depth = kmax if kmax is not None else problem.kmax

    outcome = scp_solve(problem.weights, opts, depth)
    code = outcome.exit_code
    result = outcome.to_dict()
    if outcome.completed_weights is not None:
        result["diagram"] = weight_diagram(outcome.completed_weights)
    typer.echo(render_certificate(build_certificate("scp", result, opts, path, code)))

    if outcome.refusal is not None:
        print_verdict("Refused", False, {"reason": outcome.refusal["reason"]})
        return code

    certificate = outcome.certificate
    assert certificate is not None
    print_verdict(
        certificate.verdict.value,
        code == 0,
        {"a1": f"{outcome.norms[0]:.6g}", "a2": f"{outcome.norms[1]:.6g}", "mismatched weights": len(outcome.mismatches)},
    )
    if certificate.measure is not None:
        console.print(atoms_table(certificate.measure, ["s", "t"][: certificate.measure.nvars]))
    if outcome.completed_weights is not None:
        console.print(Panel(weight_diagram(outcome.completed_weights), title="Completed weights"))
    return code
