"""Moment and localizing matrices and the certificates computed from them.

Every matrix keeps its monomial basis as row/column labels so that kernel
vectors can be read back as column relations (polynomials over the basis).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, field_validator

from kmoment.core.errors import MissingMomentError, StructureError
from kmoment.core.moments import MomentSequence, riesz_eval
from kmoment.core.poly import MonomialSet, MultiIndex, Polynomial, grlex_key

# Kernel coefficients below this are zeroed before consistency checks
KERNEL_ZERO_TOL = 1e-10
SYMMETRY_TOL = 1e-14


class Constraint(BaseModel):
    """A polynomial inequality ``g >= 0`` cutting out the support set K."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    g: Polynomial
    name: str = "g"

    @field_validator("g")
    @classmethod
    def validate_nonzero(cls, value: Polynomial) -> Polynomial:
        """Reject the zero polynomial."""
        if value.is_zero():
            raise ValueError("constraint polynomial must be nonzero")
        return value

    @property
    def degree(self) -> int:
        return self.g.degree


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    """Symmetric matrix with rows and columns labelled by a monomial basis.

    Attributes:
        basis: Row/column labels
        entries: ``entries[i, j] = L(g * x^(basis[i] + basis[j]))`` (``g = 1`` for a
            plain moment matrix)
        source: Moment data the entries were read from
        constraint: The localizing polynomial, None for a moment matrix
    """

    basis: MonomialSet
    entries: np.ndarray
    source: Optional[MomentSequence] = None
    constraint: Optional[Constraint] = None

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=float).reshape(len(self.basis), len(self.basis))
        if entries.size and np.max(np.abs(entries - entries.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(entries))):
            raise StructureError("moment matrix entries are not symmetric")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def size(self) -> int:
        return len(self.basis)

    def principal(self, sub: MonomialSet) -> "MomentMatrix":
        """Principal submatrix on a sub-basis."""
        idx = [self.basis.index(a) for a in sub]
        return MomentMatrix(sub, self.entries[np.ix_(idx, idx)], self.source, self.constraint)

    def column(self, alpha: Sequence[int]) -> np.ndarray:
        return np.asarray(self.entries[:, self.basis.index(alpha)])

    def to_lists(self) -> List[List[float]]:
        return [[float(v) for v in row] for row in self.entries]


@dataclass(frozen=True)
class PsdReport:
    """Eigen-decomposition verdict for a symmetric matrix.

    ``rank + len(kernel_basis) == size`` always holds.
    """

    is_psd: bool
    min_eigenvalue: float
    rank: int
    kernel_basis: List[Polynomial]
    norm: float = 0.0
    eigenvalues: Tuple[float, ...] = ()
    min_eigenvector: Optional[Polynomial] = None
    kernel_vectors: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def to_dict(self) -> Dict[str, object]:
        return {
            "is_psd": self.is_psd,
            "min_eigenvalue": self.min_eigenvalue,
            "rank": self.rank,
            "norm": self.norm,
            "kernel": [str(p) for p in self.kernel_basis],
        }


@dataclass(frozen=True)
class Violation:
    """A product ``L(x_i * p * x^beta)`` that should vanish but does not."""

    kernel: Polynomial
    variable: int
    beta: MultiIndex
    value: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "kernel": str(self.kernel),
            "variable": self.variable,
            "beta": list(self.beta),
            "value": self.value,
        }


@dataclass(frozen=True)
class ConsistencyReport:
    """Outcome of the recursive-consistency test.

    Attributes:
        consistent: True iff no tested product violated the tolerance
        violations: Products that failed
        untested: (kernel index, variable, beta) triples skipped for missing moments
    """

    consistent: bool
    violations: List[Violation]
    untested: List[Tuple[int, int, MultiIndex]]

    def to_dict(self) -> Dict[str, object]:
        return {
            "consistent": self.consistent,
            "violations": [v.to_dict() for v in self.violations],
            "untested": len(self.untested),
        }


def missing_moments(
    gamma: MomentSequence, basis: MonomialSet, g: Optional[Polynomial] = None
) -> List[MultiIndex]:
    """Indices a (localizing) moment matrix over ``basis`` needs but ``gamma`` lacks."""
    shifts = g.monomials() if g is not None else [MultiIndex.zero(basis.nvars)]
    needed = {a.plus(b).plus(d) for a in basis for b in basis for d in shifts}
    return sorted((a for a in needed if a not in gamma), key=grlex_key)


def moment_matrix(gamma: MomentSequence, basis: MonomialSet) -> MomentMatrix:
    """Assemble ``M[alpha, beta] = gamma_{alpha + beta}``.

    Raises:
        MissingMomentError: Listing every missing index and the first entry needing it
    """
    size = len(basis)
    entries = np.zeros((size, size))
    missing_pairs = []
    missing = set()
    for i, a in enumerate(basis):
        for j in range(i, size):
            b = basis[j]
            value = gamma.get(a.plus(b))
            if value is None:
                missing.add(a.plus(b))
                missing_pairs.append((a, b))
                continue
            entries[i, j] = entries[j, i] = value
    if missing:
        raise MissingMomentError(missing, missing_pairs)
    return MomentMatrix(basis, entries, gamma)


def localizing_matrix(gamma: MomentSequence, g: Union[Constraint, Polynomial], basis: MonomialSet) -> MomentMatrix:
    """Assemble ``M_g[alpha, beta] = L(g * x^(alpha + beta))``.

    Raises:
        MissingMomentError: If some ``gamma_{alpha + beta + delta}`` is unavailable
    """
    constraint = g if isinstance(g, Constraint) else Constraint(g=g)
    terms = constraint.g.terms
    size = len(basis)
    entries = np.zeros((size, size))
    missing_pairs = []
    missing = set()
    for i, a in enumerate(basis):
        for j in range(i, size):
            b = basis[j]
            ab = a.plus(b)
            total = 0.0
            for delta, coeff in terms.items():
                value = gamma.get(ab.plus(delta))
                if value is None:
                    missing.add(ab.plus(delta))
                    missing_pairs.append((a, b))
                    continue
                total += coeff * value
            entries[i, j] = entries[j, i] = total
    if missing:
        raise MissingMomentError(missing, missing_pairs)
    return MomentMatrix(basis, entries, gamma, constraint)


def localizing_basis(
    gamma: MomentSequence, g: Union[Constraint, Polynomial], basis: MonomialSet
) -> Tuple[MonomialSet, List[MultiIndex]]:
    """Largest degree truncation of ``basis`` on which ``M_g`` is fully available.

    Returns:
        The usable sub-basis and the basis monomials left untested
    """
    poly = g.g if isinstance(g, Constraint) else g
    for degree in range(basis.max_degree, -1, -1):
        sub = basis.truncate(degree)
        if len(sub) and not missing_moments(gamma, sub, poly):
            return sub, [a for a in basis if a not in sub]
    return MonomialSet([], basis.nvars), list(basis)


def maximal_moment_basis(gamma: MomentSequence) -> MonomialSet:
    """Largest downward-closed basis (greedy in graded-lex order) with a full moment matrix."""
    support = gamma.support
    halves = MonomialSet([a for a in support if a.plus(a) in support], gamma.nvars)
    chosen: List[MultiIndex] = []
    for alpha in halves.downward_closure():
        if not all(p in chosen for p in alpha.predecessors()):
            continue
        if all(alpha.plus(b) in support for b in chosen + [alpha]):
            chosen.append(alpha)
    return MonomialSet(chosen, gamma.nvars)


def _leading_sign(vector: np.ndarray) -> float:
    nonzero = np.flatnonzero(np.abs(vector) > KERNEL_ZERO_TOL)
    if nonzero.size == 0:
        return 1.0
    return 1.0 if vector[nonzero[-1]] > 0 else -1.0


def psd_rank(M: MomentMatrix, psd_tol: float = 1e-9, rank_tol: float = 1e-8) -> PsdReport:
    """Positivity, numerical rank and kernel of a labelled symmetric matrix.

    Args:
        M: The matrix
        psd_tol: Allowed negative eigenvalue, relative to ``max(1, ||M||_2)``
        rank_tol: Singular values at most ``rank_tol * sigma_max`` count as zero

    Returns:
        PsdReport whose kernel polynomials are orthonormal coefficient vectors over
        ``M.basis``
    """
    if M.size == 0:
        return PsdReport(True, 0.0, 0, [], kernel_vectors=np.zeros((0, 0)))

    eigenvalues, eigenvectors = scipy.linalg.eigh(M.entries)
    norm = float(np.max(np.abs(eigenvalues)))
    min_eigenvalue = float(eigenvalues[0])
    is_psd = min_eigenvalue >= -psd_tol * max(1.0, norm)

    cutoff = rank_tol * norm
    in_kernel = np.abs(eigenvalues) <= cutoff
    rank = int(np.count_nonzero(~in_kernel))

    kernel = eigenvectors[:, in_kernel].copy()
    kernel[np.abs(kernel) < KERNEL_ZERO_TOL] = 0.0
    for k in range(kernel.shape[1]):
        kernel[:, k] *= _leading_sign(kernel[:, k])
    kernel_basis = [Polynomial.from_vector(kernel[:, k], M.basis) for k in range(kernel.shape[1])]

    lowest = eigenvectors[:, 0] * _leading_sign(eigenvectors[:, 0])
    return PsdReport(
        is_psd=is_psd,
        min_eigenvalue=min_eigenvalue,
        rank=rank,
        kernel_basis=kernel_basis,
        norm=norm,
        eigenvalues=tuple(float(v) for v in eigenvalues),
        min_eigenvector=Polynomial.from_vector(lowest, M.basis, zero_tol=KERNEL_ZERO_TOL),
        kernel_vectors=kernel,
    )


def recursive_consistency(
    M: MomentMatrix,
    gamma: MomentSequence,
    report: Optional[PsdReport] = None,
    tol: float = 1e-7,
    rank_tol: float = 1e-8,
) -> ConsistencyReport:
    """Check that kernel column relations survive multiplication by each variable.

    For every kernel polynomial ``p``, variable ``x_i`` and basis monomial ``beta``
    with all moments available, ``L(x_i * p * x^beta)`` must vanish up to
    ``tol`` times the size of the moments involved.
    """
    if report is None:
        report = psd_rank(M, rank_tol=rank_tol)
    nvars = M.basis.nvars
    violations: List[Violation] = []
    untested: List[Tuple[int, int, MultiIndex]] = []

    for k, p in enumerate(report.kernel_basis):
        weight = sum(abs(c) for c in p.terms.values())
        for i in range(nvars):
            xp = p.shift(MultiIndex.unit(i, nvars))
            for beta in M.basis:
                q = xp.shift(beta)
                needed = q.monomials()
                if not gamma.has_all(needed):
                    untested.append((k, i, beta))
                    continue
                value = riesz_eval(gamma, q)
                scale = weight * max(1.0, max(abs(gamma[a]) for a in needed))
                if abs(value) > tol * scale:
                    violations.append(Violation(p, i, beta, value))

    return ConsistencyReport(not violations, violations, untested)


def smulyan_blocks(
    entries: np.ndarray, split: int, cond: float = 1e-12
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Split ``[[A, B], [B^T, C]]`` and return ``(A, B, C, W)`` with W the min-norm solution of ``AW = B``."""
    entries = np.asarray(entries, dtype=float)
    A = entries[:split, :split]
    B = entries[:split, split:]
    C = entries[split:, split:]
    if A.size == 0 or B.size == 0:
        return A, B, C, np.zeros((split, entries.shape[0] - split))
    W = scipy.linalg.lstsq(A, B, cond=cond)[0]
    return A, B, C, W


def smulyan_check(M_big: Union[MomentMatrix, np.ndarray], split: int, tol: float = 1e-9) -> bool:
    """Smul'jan test on the block split of ``M_big`` after ``split`` rows.

    True iff ``B`` lies in the range of ``A`` (least-squares residual below
    ``tol``) and ``C - W^T A W >= -tol * I`` for the minimum-norm ``W``.
    """
    entries = M_big.entries if isinstance(M_big, MomentMatrix) else np.asarray(M_big, dtype=float)
    if not 0 <= split <= entries.shape[0]:
        raise StructureError(f"split {split} outside 0..{entries.shape[0]}")
    A, B, C, W = smulyan_blocks(entries, split)
    if C.size == 0:
        return True
    scale = max(1.0, float(np.max(np.abs(entries))))
    residual = float(np.max(np.abs(A @ W - B))) if B.size else 0.0
    if residual > tol * scale:
        return False
    schur = C - W.T @ A @ W
    schur = (schur + schur.T) / 2
    return bool(scipy.linalg.eigvalsh(schur)[0] >= -tol * scale)
