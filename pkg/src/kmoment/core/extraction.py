"""Atom and weight extraction from flat moment matrices.

A flat moment matrix defines commuting multiplication operators on the span
of its pivot columns; their joint eigenvalues are the atoms of the unique
representing measure and the weights follow from a Vandermonde solve.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from rich.console import Console

from kmoment.core.config import SolveOptions, is_verbose
from kmoment.core.errors import DimensionMismatchError, ExtractionError
from kmoment.core.matrices import Constraint, MomentMatrix, psd_rank
from kmoment.core.moments import AtomicMeasure, MomentSequence, moments_of_atomic
from kmoment.core.poly import MonomialSet, MultiIndex

console = Console(stderr=True)


@dataclass(frozen=True, eq=False)
class MultiplicationSystem:
    """Multiplication-by-``x_i`` operators on the pivot columns of a flat matrix.

    Attributes:
        column_basis: The ``r`` pivot monomials
        shift_matrices: One ``r x r`` matrix per variable; column ``j`` expands
            column ``pivot_j + e_i`` in the pivot columns
        residual: Largest relative error of those expansions
    """

    column_basis: MonomialSet
    shift_matrices: Tuple[np.ndarray, ...]
    residual: float = 0.0

    @property
    def rank(self) -> int:
        return len(self.column_basis)

    @property
    def nvars(self) -> int:
        return len(self.shift_matrices)

    def commutator_norms(self) -> Dict[Tuple[int, int], float]:
        """Relative commutator size for each pair of variables."""
        norms = {}
        for i in range(self.nvars):
            for j in range(i + 1, self.nvars):
                Ni, Nj = self.shift_matrices[i], self.shift_matrices[j]
                scale = max(1.0, np.linalg.norm(Ni, 2) * np.linalg.norm(Nj, 2))
                norms[(i, j)] = float(np.linalg.norm(Ni @ Nj - Nj @ Ni, 2) / scale)
        return norms


@dataclass(frozen=True)
class VerificationReport:
    """Moment residual of a candidate measure against the data."""

    max_residual: float
    ok: bool
    worst_index: Optional[MultiIndex] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "max_residual": self.max_residual,
            "ok": self.ok,
            "worst_index": list(self.worst_index) if self.worst_index is not None else None,
        }


def build_multiplication_system(
    M_ext: MomentMatrix, rank_tol: float = 1e-8, flat_tol: float = 1e-7
) -> MultiplicationSystem:
    """Read multiplication operators off a flat moment matrix.

    The principal block used for pivots is the interior of ``M_ext.basis``
    (monomials whose shifts by every variable are still labels), which for a
    degree-``d`` basis is the degree ``d - 1`` block.

    Raises:
        ExtractionError: If ``M_ext`` is not flat over that block or a shifted
            column leaves the pivot span
    """
    basis = M_ext.basis
    nvars = basis.nvars
    interior = basis.interior()
    if len(interior) == 0:
        raise ExtractionError("flatness", "basis has no block closed under shifts")

    rank = psd_rank(M_ext, rank_tol=rank_tol).rank
    inner_rank = psd_rank(M_ext.principal(interior), rank_tol=rank_tol).rank
    if rank == 0:
        raise ExtractionError("flatness", "moment matrix is zero")
    if inner_rank != rank:
        raise ExtractionError(
            "flatness",
            f"rank {rank} of the full matrix differs from rank {inner_rank} of its interior block",
            {"rank": rank, "interior_rank": inner_rank},
        )

    # Pivot columns by QR with column pivoting over the interior columns
    inner_idx = [basis.index(a) for a in interior]
    columns = M_ext.entries[:, inner_idx]
    _, _, order = scipy.linalg.qr(columns, mode="economic", pivoting=True)
    pivots = MonomialSet([interior[k] for k in order[:rank]], nvars)
    pivot_idx = [basis.index(a) for a in pivots]
    pivot_columns = M_ext.entries[:, pivot_idx]

    scale = max(1.0, float(np.max(np.abs(M_ext.entries))))
    shifts = []
    worst = 0.0
    for i in range(nvars):
        unit = MultiIndex.unit(i, nvars)
        target = M_ext.entries[:, [basis.index(a.plus(unit)) for a in pivots]]
        coeffs = scipy.linalg.lstsq(pivot_columns, target)[0]
        residual = float(np.max(np.abs(pivot_columns @ coeffs - target))) / scale
        worst = max(worst, residual)
        if residual > flat_tol:
            raise ExtractionError(
                "flatness",
                f"shifted columns by variable {i} leave the pivot span (residual {residual:.3e})",
                {"variable": i, "residual": residual},
            )
        shifts.append(coeffs)

    if is_verbose():
        console.print(f"[dim]multiplication system: rank {rank}, pivots {pivots.labels()}[/dim]")
    return MultiplicationSystem(pivots, tuple(shifts), worst)


def extract_atoms(
    sys: MultiplicationSystem, gamma: MomentSequence, opts: Optional[SolveOptions] = None
) -> AtomicMeasure:
    """Joint eigenvalues of the shift matrices as atoms, weights by least squares.

    Raises:
        ExtractionError: On non-commuting shifts, complex atoms, negative weights
            or an atom count above the pivot count
    """
    opts = opts or SolveOptions()
    nvars = sys.nvars
    if gamma.nvars != nvars:
        raise DimensionMismatchError(nvars, gamma.nvars, "moment sequence")

    for (i, j), norm in sys.commutator_norms().items():
        if norm > opts.commute_tol:
            raise ExtractionError(
                "commutation",
                f"shift matrices {i} and {j} do not commute (relative norm {norm:.3e})",
                {"pair": [i, j], "norm": norm},
            )

    # A random convex combination separates the atoms almost surely
    rng = np.random.default_rng(opts.seed)
    mix = rng.random(nvars) + 0.1
    mix /= mix.sum()
    combined = sum(c * N for c, N in zip(mix, sys.shift_matrices))
    _, eigenvectors = scipy.linalg.eig(combined)

    coordinates = np.empty((sys.rank, nvars), dtype=complex)
    for i, N in enumerate(sys.shift_matrices):
        coordinates[:, i] = np.diag(scipy.linalg.solve(eigenvectors, N @ eigenvectors))

    imaginary = float(np.max(np.abs(coordinates.imag))) if coordinates.size else 0.0
    if imaginary > opts.imag_tol:
        raise ExtractionError(
            "complex",
            f"joint eigenvalues have imaginary part {imaginary:.3e}",
            {"max_imaginary": imaginary},
        )
    atoms = coordinates.real

    weights = _solve_weights(atoms, sys.column_basis, gamma)
    floor_scale = max(1.0, abs(gamma.mass))
    if np.any(weights < -opts.weight_tol * floor_scale):
        raise ExtractionError(
            "negative_weight",
            f"weight {float(weights.min()):.3e} is negative",
            {"weights": [float(w) for w in weights]},
        )
    keep = weights > opts.weight_floor * floor_scale
    measure = AtomicMeasure.merged(atoms[keep], weights[keep], opts.merge_tol)
    if not keep.all() and weights.max() > 0:
        # A tiny weight on a far atom can carry a high pivot moment
        if not verify_representation(gamma, measure, sys.column_basis, opts.residual_tol).ok:
            positive = weights > 0
            measure = AtomicMeasure.merged(atoms[positive], weights[positive], opts.merge_tol)

    # Tchakaloff bound: never more atoms than the dimension of the pivot span
    if measure.size > len(sys.column_basis):
        raise ExtractionError(
            "tchakaloff",
            f"{measure.size} atoms exceed the {len(sys.column_basis)} pivot monomials",
        )
    return measure.sorted()


def _solve_weights(atoms: np.ndarray, pivots: MonomialSet, gamma: MomentSequence) -> np.ndarray:
    """Least-squares solve of ``sum_i w_i x_i^alpha = gamma_alpha`` over the pivots."""
    vandermonde = np.array(
        [[float(np.prod(x ** np.asarray(alpha))) for x in atoms] for alpha in pivots]
    )
    rhs = np.array([gamma[alpha] for alpha in pivots])
    return scipy.linalg.lstsq(vandermonde, rhs)[0]


def verify_representation(
    gamma: MomentSequence, mu: AtomicMeasure, C: Optional[MonomialSet] = None, tol: float = 1e-8
) -> VerificationReport:
    """Largest relative moment residual ``|gamma_a - L_mu(x^a)| / max(1, |gamma_a|)`` over ``C``."""
    C = C if C is not None else gamma.support
    if mu.size == 0:
        return VerificationReport(float("inf"), False, MultiIndex.zero(C.nvars))
    recovered = moments_of_atomic(mu, C) if len(C) else None
    worst = 0.0
    worst_index = None
    for alpha in C:
        target = gamma[alpha]
        residual = abs(target - recovered[alpha]) / max(1.0, abs(target))  # type: ignore[index]
        if residual > worst or worst_index is None:
            worst, worst_index = residual, alpha
    return VerificationReport(worst, worst <= tol, worst_index)


def support_violations(
    mu: AtomicMeasure, constraints: Sequence[Constraint], point_tol: float = 1e-6
) -> List[Dict[str, object]]:
    """Atoms where some ``g(atom) < -point_tol``."""
    found: List[Dict[str, object]] = []
    for constraint in constraints:
        values = constraint.g.evaluate_many(mu.atoms) if mu.size else np.zeros(0)
        for atom, value in zip(mu.atoms, values):
            if value < -point_tol:
                found.append(
                    {"constraint": constraint.name, "atom": [float(v) for v in atom], "value": float(value)}
                )
    return found
