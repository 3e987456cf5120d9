"""Shared fixtures: oracle measures and the shipped example files."""

import json
from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np
import pytest

import kmoment
from kmoment.core.moments import AtomicMeasure, MomentSequence, moments_of_atomic
from kmoment.core.poly import MonomialSet

EXAMPLES = Path(kmoment.__file__).parent / "examples"


@pytest.fixture
def examples_dir() -> Path:
    return EXAMPLES


@pytest.fixture
def write_json(tmp_path: Path) -> Callable[[str, Any], Path]:
    """Write a JSON document (or raw text) into the test's temporary directory."""

    def write(name: str, content: Any) -> Path:
        path = tmp_path / name
        text = content if isinstance(content, str) else json.dumps(content, indent=2)
        path.write_text(text, encoding="utf-8")
        return path

    return write


@pytest.fixture
def two_atoms() -> AtomicMeasure:
    """0.5 delta_0 + 0.5 delta_1."""
    return AtomicMeasure(np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))


@pytest.fixture
def three_atoms_1d() -> AtomicMeasure:
    """0.2 delta_0.1 + 0.3 delta_0.5 + 0.5 delta_0.9."""
    return AtomicMeasure(np.array([[0.1], [0.5], [0.9]]), np.array([0.2, 0.3, 0.5]))


@pytest.fixture
def three_atoms_2d() -> AtomicMeasure:
    """1/4 delta_(0,0) + 1/4 delta_(1,0) + 1/2 delta_(1,1)."""
    return AtomicMeasure(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]), np.array([0.25, 0.25, 0.5]))


@pytest.fixture
def inconsistent() -> MomentSequence:
    """gamma = (1, 1, 1, 1, 2): positive semidefinite but without a representing measure."""
    return MomentSequence({(0,): 1.0, (1,): 1.0, (2,): 1.0, (3,): 1.0, (4,): 2.0})


def truncation(mu: AtomicMeasure, degree: int) -> MomentSequence:
    """All moments of ``mu`` up to ``degree``."""
    return moments_of_atomic(mu, MonomialSet.triangular(mu.nvars, degree))


def certificate_from(output: str) -> Dict[str, Any]:
    """The JSON certificate a command printed ahead of its console summary."""
    start = output.index("{")
    document, _ = json.JSONDecoder().raw_decode(output[start:])
    return document


def random_measure(
    rng: np.random.Generator,
    nvars: int,
    size: int,
    lo: float = -2.0,
    hi: float = 2.0,
    separation: float = 0.1,
) -> AtomicMeasure:
    """``size`` atoms in ``[lo, hi]^nvars`` pairwise at least ``separation`` apart, weights in ``[0.05, 1]``."""
    atoms: list = []
    while len(atoms) < size:
        x = rng.uniform(lo, hi, nvars)
        if all(np.linalg.norm(x - y) >= separation for y in atoms):
            atoms.append(x)
    return AtomicMeasure(np.array(atoms), rng.uniform(0.05, 1.0, size))
