"""Check command for kmoment.

This module implements the `kmoment check` command, which reports the
necessary conditions (moment-matrix positivity, localizing positivity and
recursive consistency) without attempting any extension.
"""

import math
from pathlib import Path
from typing import Any, Dict

import typer
from rich.console import Console

from kmoment.core.certificate import build_certificate, print_verdict, render_certificate
from kmoment.core.config import Settings, effective_options
from kmoment.core.matrices import (
    localizing_basis,
    localizing_matrix,
    maximal_moment_basis,
    missing_moments,
    moment_matrix,
    psd_rank,
    recursive_consistency,
)
from kmoment.core.parser import load_problem
from kmoment.core.poly import MonomialSet, MultiIndex

console = Console(stderr=True)


def check_problem(path: Path, settings: Settings, **overrides: Any) -> int:
    """Run the necessary-condition checks on a problem file.

    Args:
        path: Problem file
        settings: Loaded settings
        overrides: CLI option overrides (None values are ignored)

    Returns:
        0 if every check passes, 2 otherwise
    """
    problem = load_problem(path)
    opts = effective_options(settings, problem.options, **overrides)
    nvars = problem.gamma.nvars
    data = problem.gamma.restrict(problem.monomials.union([MultiIndex.zero(nvars)]))

    basis = maximal_moment_basis(data)
    M = moment_matrix(data, basis)
    report = psd_rank(M, opts.psd_tol, opts.rank_tol)

    localizing: Dict[str, Any] = {}
    for constraint in problem.constraints:
        sub, skipped = localizing_basis(data, constraint, basis)
        entry: Dict[str, Any] = {
            "polynomial": str(constraint.g),
            "basis": sub.labels(),
            "untested": [a.label() for a in skipped],
        }
        if len(sub):
            entry.update(psd_rank(localizing_matrix(data, constraint, sub), opts.psd_tol, opts.rank_tol).to_dict())
        localizing[constraint.name] = entry

    consistency = recursive_consistency(M, data, report, opts.consistency_tol, opts.rank_tol)

    # Moments that would complete the full graded basis of half the data degree
    target = MonomialSet.triangular(nvars, math.ceil(data.support.max_degree / 2))
    completion = [list(a) for a in missing_moments(data, target)]

    ok = report.is_psd and consistency.consistent and all(e.get("is_psd", True) for e in localizing.values())
    code = 0 if ok else 2
    result = {
        "basis": basis.labels(),
        "moment_matrix": report.to_dict(),
        "localizing": localizing,
        "consistency": consistency.to_dict(),
        "completion": {"basis": target.labels(), "missing": completion},
        "passed": ok,
    }
    typer.echo(render_certificate(build_certificate("check", result, opts, path, code)))

    print_verdict(
        "All necessary conditions hold" if ok else "Necessary conditions violated",
        ok,
        {
            "rank": report.rank,
            "min eigenvalue": f"{report.min_eigenvalue:.3e}",
            "kernel": ", ".join(str(p) for p in report.kernel_basis) or "none",
            "violations": len(consistency.violations),
        },
    )
    if completion:
        console.print(f"[yellow]Warning: {len(completion)} moment(s) missing for the full basis {target.labels()}[/yellow]")
    return code
