"""Extract command for kmoment.

Reads atoms straight off data whose moment matrix is already flat; no
extension is attempted.
"""

from pathlib import Path
from typing import Any, Dict, Optional

import typer

from kmoment.core.certificate import (
    atoms_table,
    build_certificate,
    console,
    print_verdict,
    render_certificate,
    write_atoms_csv,
)
from kmoment.core.config import Settings, effective_options
from kmoment.core.errors import ExtractionError
from kmoment.core.extraction import build_multiplication_system, extract_atoms, verify_representation
from kmoment.core.matrices import maximal_moment_basis, moment_matrix
from kmoment.core.parser import load_problem
from kmoment.core.poly import MultiIndex


def extract_problem(
    path: Path,
    settings: Settings,
    atoms_csv: Optional[Path] = None,
    **overrides: Any,
) -> int:
    """Extract atoms from flat data; 0 on success, 2 when extraction refuses."""
    problem = load_problem(path)
    opts = effective_options(settings, problem.options, **overrides)
    nvars = problem.gamma.nvars
    data = problem.gamma.restrict(problem.monomials.union([MultiIndex.zero(nvars)]))

    basis = maximal_moment_basis(data)
    M = moment_matrix(data, basis)
    result: Dict[str, Any] = {"basis": basis.labels()}
    try:
        system = build_multiplication_system(M, opts.rank_tol, opts.extension_tol)
        measure = extract_atoms(system, data, opts)
    except ExtractionError as e:
        result.update({"extracted": False, "reason": e.reason, "message": str(e), "detail": e.detail})
        typer.echo(render_certificate(build_certificate("extract", result, opts, path, 2)))
        print_verdict("Extraction refused", False, {"reason": e.reason})
        return 2

    verification = verify_representation(data, measure, data.support, opts.residual_tol)
    code = 0 if verification.ok else 2
    result.update(
        {
            "extracted": True,
            "pivots": system.column_basis.labels(),
            "atoms": measure.atoms.tolist(),
            "weights": measure.weights.tolist(),
            "verification": verification.to_dict(),
        }
    )
    typer.echo(render_certificate(build_certificate("extract", result, opts, path, code)))

    print_verdict(
        "Atoms extracted" if verification.ok else "Atoms do not reproduce the data",
        verification.ok,
        {"atoms": measure.size, "residual": f"{verification.max_residual:.3e}"},
    )
    console.print(atoms_table(measure))
    if atoms_csv is not None:
        write_atoms_csv(measure, atoms_csv)
    return code
