"""Dominate command for kmoment.

Prints an explicit dominating polynomial for one monomial (or for every
monomial up to a degree) together with a grid verification table.
"""

from typing import Any, Dict, List, Optional

import typer
from rich.table import Table

from kmoment.core.certificate import build_certificate, console, print_verdict, render_certificate
from kmoment.core.config import GridSpec
from kmoment.core.dominating import GridK, boundedness_check, dominate_monomial, dominate_space, domination_table
from kmoment.core.errors import StructureError
from kmoment.core.parser import parse_alpha
from kmoment.core.poly import MultiIndex, Polynomial

# Grid excess above this counts as a domination failure
EXCESS_TOL = 1e-9


def dominate_command(alpha: Optional[str], space: Optional[int], nvars: int, grid: GridSpec) -> int:
    """Build and verify a dominating polynomial.

    Args:
        alpha: Exponent vector such as ``"3"`` or ``"1,1"``
        space: Degree bound ``k`` for the whole space (instead of ``alpha``)
        nvars: Number of variables when ``space`` is given
        grid: Verification grid

    Returns:
        0 if ``|x^alpha| <= p`` on the whole grid, 2 otherwise
    """
    if (alpha is None) == (space is None):
        raise StructureError("give exactly one of an exponent vector or --space")

    monomials: List[MultiIndex]
    if alpha is not None:
        target = parse_alpha(alpha)
        p = dominate_monomial(target)
        K = GridK.from_spec(grid, target.nvars)
        rows = [row for row in domination_table(p, K, target.degree) if row[0] == target]
        label = f"x^{target.label()}"
        bound = boundedness_check(Polynomial.monomial(target), p, K)
    else:
        p = dominate_space(space, nvars)  # type: ignore[arg-type]
        K = GridK.from_spec(grid, nvars)
        rows = domination_table(p, K, space)  # type: ignore[arg-type]
        label = f"degree <= {space} in {nvars} variable(s)"
        bound = None

    worst = max(excess for _, excess in rows)
    ok = worst <= EXCESS_TOL and float(p.evaluate_many(K.points).min()) >= 1.0 - EXCESS_TOL
    code = 0 if ok else 2

    result: Dict[str, Any] = {
        "target": label,
        "polynomial": str(p),
        "degree": p.degree,
        "grid": K.description,
        "table": [{"index": list(a), "max_excess": excess} for a, excess in rows],
        "dominated": ok,
    }
    if bound is not None:
        result["boundedness"] = bound.to_dict()
    typer.echo(render_certificate(build_certificate("dominate", result, exit_code=code)))

    table = Table(title=f"max over grid of |x^a| - p  ({K.description})")
    table.add_column("monomial")
    table.add_column("max excess", justify="right")
    for a, excess in rows:
        table.add_row(a.label(), f"{excess:.6g}", style=None if excess <= EXCESS_TOL else "red")
    print_verdict(str(p), ok, {"target": label, "degree": p.degree})
    console.print(table)
    return code
