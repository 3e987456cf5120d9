"""Certificate documents and console summaries.

A certificate is the JSON document a command writes to standard output. It
echoes the command, the tool version and every effective option so that a
rerun with the same input reproduces it byte for byte.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from kmoment import __version__
from kmoment.core.config import SolveOptions
from kmoment.core.moments import AtomicMeasure
from kmoment.core.poly import variable_names

console = Console(stderr=True)


def build_certificate(
    command: str,
    result: Dict[str, Any],
    options: Optional[SolveOptions] = None,
    source: Optional[Path] = None,
    exit_code: int = 0,
) -> Dict[str, Any]:
    """Wrap a command result with the command echo, version and options."""
    return {
        "tool": "kmoment",
        "version": __version__,
        "command": command,
        "input": str(source) if source is not None else None,
        "options": options.model_dump() if options is not None else None,
        "exit_code": exit_code,
        "result": result,
    }


def _encode(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def render_certificate(document: Dict[str, Any]) -> str:
    """Deterministic JSON text of a certificate."""
    return json.dumps(document, indent=2, default=_encode, allow_nan=True)


def atoms_table(measure: AtomicMeasure, names: Optional[Sequence[str]] = None, title: str = "Atoms") -> Table:
    names = list(names or variable_names(measure.nvars))
    table = Table(title=title)
    for name in names:
        table.add_column(name, justify="right")
    table.add_column("weight", justify="right", style="green")
    for x, w in zip(measure.atoms, measure.weights):
        table.add_row(*[f"{v:.10g}" for v in x], f"{w:.10g}")
    return table


def print_verdict(verdict: str, ok: bool, details: Optional[Dict[str, Any]] = None) -> None:
    """One panel naming the verdict, green on success and red otherwise."""
    lines = [f"[bold]{verdict}[/bold]"]
    for key, value in (details or {}).items():
        lines.append(f"[dim]{key}:[/dim] {value}")
    console.print(Panel.fit("\n".join(lines), border_style="green" if ok else "red"))


def write_atoms_csv(measure: AtomicMeasure, path: Path) -> None:
    path.write_text(measure.to_csv(), encoding="utf-8")
    console.print(f"[green]Atom table written to {path}[/green]")
