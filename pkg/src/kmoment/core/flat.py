"""Flat extensions and the end-to-end truncated moment solve.

``solve_tmp`` walks the certificate pipeline: moment-matrix positivity,
localizing positivity, recursive consistency, a flat extension (or direct
flatness), atom extraction and residual verification. Each stage either
passes or produces the verdict that stops the pipeline.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from rich.console import Console

from kmoment.core.config import SolveOptions, is_verbose
from kmoment.core.dominating import dominate_space
from kmoment.core.errors import ExtensionError, ExtractionError, NestingError, StructureError
from kmoment.core.extraction import (
    build_multiplication_system,
    extract_atoms,
    support_violations,
    verify_representation,
)
from kmoment.core.matrices import (
    Constraint,
    MomentMatrix,
    PsdReport,
    localizing_basis,
    localizing_matrix,
    maximal_moment_basis,
    moment_matrix,
    psd_rank,
    recursive_consistency,
)
from kmoment.core.moments import AtomicMeasure, MomentSequence, moments_of_atomic
from kmoment.core.poly import MonomialSet, MultiIndex, Polynomial, border, grlex_key

console = Console(stderr=True)

GENERATION_NOTE = (
    "the extension space basis + border(basis) is dominated by the recorded polynomial; "
    "whether it generates the whole polynomial algebra cannot be checked from finite data"
)


class Verdict(str, Enum):
    """Outcome of a solve."""

    REPRESENTABLE = "Representable"
    PSD_FAILURE = "PsdFailure"
    LOCALIZING_FAILURE = "LocalizingFailure"
    CONSISTENCY_FAILURE = "ConsistencyFailure"
    DEPTH_EXHAUSTED = "DepthExhausted"

    @property
    def exit_code(self) -> int:
        return 0 if self is Verdict.REPRESENTABLE else 2


@dataclass
class SolveCertificate:
    """Everything a solve decided, with the evidence behind it.

    Attributes:
        verdict: The outcome
        measure: Representing measure (only when representable)
        witness: Failing eigenvalue, violated product or the stage that broke
        extended_moments: Moment values added by a flat extension
        basis: Basis of the moment matrix that was tested
        rank: Numerical rank of that matrix
        residual: Moment residual of the measure against the data
        extension_steps: One-step extensions performed
        untested: Localizing checks skipped for missing moments, per constraint
        dominating_polynomial: Dominator of the data degree
        warnings: Structural remarks about the input
        notes: Limitations the result is subject to
    """

    verdict: Verdict
    measure: Optional[AtomicMeasure] = None
    witness: Dict[str, Any] = field(default_factory=dict)
    extended_moments: Optional[MomentSequence] = None
    basis: Optional[MonomialSet] = None
    rank: Optional[int] = None
    residual: Optional[float] = None
    extension_steps: int = 0
    untested: Dict[str, List[str]] = field(default_factory=dict)
    dominating_polynomial: Optional[Polynomial] = None
    warnings: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def representable(self) -> bool:
        return self.verdict is Verdict.REPRESENTABLE

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "verdict": self.verdict.value,
            "atoms": [list(map(float, x)) for x in self.measure.atoms] if self.measure else None,
            "weights": [float(w) for w in self.measure.weights] if self.measure else None,
            "residual": self.residual,
            "witness": self.witness,
            "basis": self.basis.labels() if self.basis is not None else None,
            "rank": self.rank,
            "extension_steps": self.extension_steps,
            "extended_moments": self.extended_moments.records() if self.extended_moments else None,
            "untested": self.untested,
            "dominating_polynomial": str(self.dominating_polynomial)
            if self.dominating_polynomial is not None
            else None,
            "warnings": self.warnings,
            "notes": self.notes,
        }
        return data


@dataclass(frozen=True, eq=False)
class ExtensionResult:
    """A successful flat extension.

    Attributes:
        extended: Data plus every moment the extension fixed
        matrix: The flat moment matrix over the extended basis
        steps: Number of one-step extensions used
        added: Indices of the moments that were not in the input
    """

    extended: MomentSequence
    matrix: MomentMatrix
    steps: int
    added: MonomialSet


@dataclass
class FrameReport:
    """Per-level solves of nested truncations of one functional."""

    levels: List[Dict[str, Any]]
    masses: List[float]
    shared_moment_max_discrepancy: float
    all_solvable: bool
    certificates: List[SolveCertificate] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "levels": self.levels,
            "masses": self.masses,
            "shared_moment_max_discrepancy": self.shared_moment_max_discrepancy,
            "all_solvable": self.all_solvable,
            "certificates": [c.to_dict() for c in self.certificates],
        }


def is_flat(M_small: MomentMatrix, M_big: MomentMatrix, rank_tol: float = 1e-8) -> bool:
    """Whether ``M_big`` has the same numerical rank as its sub-block ``M_small``.

    Raises:
        NestingError: If ``M_small.basis`` is not contained in ``M_big.basis``
    """
    if not M_small.basis.issubset(M_big.basis):
        raise NestingError(
            f"basis {M_small.basis.labels()} is not contained in {M_big.basis.labels()}"
        )
    small = psd_rank(M_small, rank_tol=rank_tol).rank
    big = psd_rank(M_big, rank_tol=rank_tol).rank
    return small == big


def _hint_values(hint: Optional[Mapping[Sequence[int], float]]) -> Dict[MultiIndex, float]:
    return {MultiIndex(k): float(v) for k, v in (hint or {}).items()}


def _minimum_corner(
    M: MomentMatrix,
    B0: np.ndarray,
    slots: List[np.ndarray],
    A: np.ndarray,
    target: np.ndarray,
    rank_tol: float,
) -> np.ndarray:
    """Unknowns minimizing ``trace(B^T M^+ B)`` subject to ``A u = target``.

    ``B = B0 + sum_k u_k slots[k]``. The trace equals the corner trace of the
    extension, which bounds ``sum_i w_i |b(x_i)|^2`` over its atoms and
    border monomials ``b``.
    """
    count = len(slots)
    if A.size:
        particular = scipy.linalg.lstsq(A, target)[0]
        free = scipy.linalg.null_space(A)
    else:
        particular, free = np.zeros(count), np.eye(count)
    if free.shape[1] == 0:
        return particular

    eigenvalues, eigenvectors = np.linalg.eigh(M.entries)
    keep = eigenvalues > rank_tol * max(1.0, float(eigenvalues.max()))
    L = eigenvectors[:, keep].T / np.sqrt(eigenvalues[keep])[:, None]
    G = np.column_stack([(L @ E).ravel() for E in slots])
    offset = (L @ B0).ravel() + G @ particular
    z = scipy.linalg.lstsq(G @ free, -offset)[0]
    return particular + free @ z


def _extend_once(
    gamma: MomentSequence,
    M: MomentMatrix,
    report: PsdReport,
    hint: Dict[MultiIndex, float],
    tol: float,
    rank_tol: float,
) -> Tuple[MomentSequence, MonomialSet]:
    """Add the border columns of ``M`` and fix every moment they need.

    The off-diagonal block ``B`` must satisfy ``K^T B = 0`` for the kernel ``K``
    of ``M``; moments of ``B`` that the data lacks are solved for as one unknown
    per index. With a hint they land nearest to it; without one they minimize
    the trace of the corner block. The corner block is ``W^T M W`` for the
    minimum-norm ``W`` with ``M W = B``, projected onto moment structure.
    """
    basis = M.basis
    edge = border(basis)
    plus = basis.union(edge)
    known = gamma.values

    unknown = sorted({a.plus(b) for a in basis for b in edge} - set(known), key=grlex_key)
    position = {u: k for k, u in enumerate(unknown)}
    B = np.zeros((len(basis), len(edge)))
    for i, a in enumerate(basis):
        for j, b in enumerate(edge):
            B[i, j] = known.get(a.plus(b), 0.0)

    kernel = report.kernel_vectors if report.kernel_vectors is not None else np.zeros((len(basis), 0))
    rows, rhs = [], []
    if unknown:
        for k in range(kernel.shape[1]):
            for j, b in enumerate(edge):
                row = np.zeros(len(unknown))
                for i, a in enumerate(basis):
                    slot = position.get(a.plus(b))
                    if slot is not None:
                        row[slot] += kernel[i, k]
                rows.append(row)
                rhs.append(-kernel[:, k] @ B[:, j])
    A = np.array(rows).reshape(len(rows), len(unknown))
    target = np.array(rhs)

    if not unknown:
        values = np.zeros(0)
    elif hint:
        values = np.array([hint.get(u, 0.0) for u in unknown])
        if A.size:
            values = values + scipy.linalg.lstsq(A, target - A @ values)[0]
    else:
        slots = []
        for u in unknown:
            E = np.zeros_like(B)
            for i, a in enumerate(basis):
                for j, b in enumerate(edge):
                    if a.plus(b) == u:
                        E[i, j] = 1.0
            slots.append(E)
        values = _minimum_corner(M, B, slots, A, target, rank_tol)

    solved = dict(zip(unknown, (float(v) for v in values)))
    for i, a in enumerate(basis):
        for j, b in enumerate(edge):
            if a.plus(b) in solved:
                B[i, j] = solved[a.plus(b)]

    scale = max(1.0, float(np.max(np.abs(M.entries))), float(np.max(np.abs(B))) if B.size else 0.0)
    W = scipy.linalg.lstsq(M.entries, B, cond=rank_tol)[0]
    range_residual = float(np.max(np.abs(M.entries @ W - B))) / scale if B.size else 0.0
    if range_residual > tol:
        raise ExtensionError(
            "range",
            f"border columns leave the range of the moment matrix (residual {range_residual:.3e})",
            {"residual": range_residual},
        )

    corner = B.T @ W
    corner = (corner + corner.T) / 2

    groups: Dict[MultiIndex, List[float]] = {}
    for j, b in enumerate(edge):
        for l in range(j, len(edge)):
            groups.setdefault(b.plus(edge[l]), []).append(float(corner[j, l]))

    added = dict(solved)
    worst, worst_index = 0.0, None
    for index, entries in groups.items():
        reference = known.get(index, solved.get(index))
        centre = reference if reference is not None else float(np.mean(entries))
        drift = max(abs(e - centre) for e in entries) / max(1.0, abs(centre))
        if drift > worst:
            worst, worst_index = drift, index
        if reference is None:
            added[index] = centre
    if worst > tol:
        raise ExtensionError(
            "structure",
            f"corner block drifts {worst:.3e} from moment structure at {worst_index}",
            {"drift": worst, "index": list(worst_index) if worst_index else None},
        )

    return gamma.extend(added), plus


def build_flat_extension(
    gamma: MomentSequence,
    basis: MonomialSet,
    depth: int = 1,
    tol: float = 1e-7,
    hint: Optional[Mapping[Sequence[int], float]] = None,
    opts: Optional[SolveOptions] = None,
) -> ExtensionResult:
    """Extend ``M(basis)`` by its border until the extension is flat.

    Args:
        gamma: Moment data covering ``basis.sums()``
        basis: Basis of the starting moment matrix
        depth: Maximum number of one-step extensions
        tol: Range and structure tolerance
        hint: Prior values for moments the data lacks. Without one, the
            free moments minimize the corner trace about the mean
        opts: Remaining tolerances

    Returns:
        ExtensionResult with the extended data and its flat matrix

    Raises:
        ExtensionError: Naming the stage that broke
    """
    opts = opts or SolveOptions()
    prior = _hint_values(hint)

    M = moment_matrix(gamma, basis)
    report = psd_rank(M, opts.psd_tol, opts.rank_tol)
    if not report.is_psd:
        raise ExtensionError("psd", "moment matrix is not positive semidefinite",
                             {"min_eigenvalue": report.min_eigenvalue})
    consistency = recursive_consistency(M, gamma, report, opts.consistency_tol, opts.rank_tol)
    if not consistency.consistent:
        raise ExtensionError(
            "consistency",
            "kernel relations do not survive multiplication",
            {"violations": [v.to_dict() for v in consistency.violations]},
        )

    # Without a hint, free moments are chosen in coordinates centered at the mean
    shift = None
    if not prior and gamma.support.is_downward_closed() and basis.is_downward_closed():
        e = np.eye(gamma.nvars, dtype=int)
        if all(tuple(row) in gamma for row in e):
            shift = np.array([gamma[tuple(row)] for row in e]) / gamma.mass
    if shift is not None and np.any(shift != 0.0):
        centered = gamma.translated(-shift)
        M = moment_matrix(centered, basis)
        report = psd_rank(M, opts.psd_tol, opts.rank_tol)
        extended, _, steps = _extend_until_flat(centered, M, report, prior, depth, tol, opts)
        current = gamma.extend(extended.translated(shift).values)
        plus = MonomialSet(basis, gamma.nvars)
        for _ in range(steps):
            plus = plus.union(border(plus))
        added = MonomialSet([a for a in current.support if a not in gamma], gamma.nvars)
        return ExtensionResult(current, moment_matrix(current, plus), steps, added)

    current, M_plus, steps = _extend_until_flat(gamma, M, report, prior, depth, tol, opts)
    added = MonomialSet([a for a in current.support if a not in gamma], gamma.nvars)
    return ExtensionResult(current, M_plus, steps, added)


def _extend_until_flat(
    gamma: MomentSequence,
    M: MomentMatrix,
    report: PsdReport,
    prior: Dict[MultiIndex, float],
    depth: int,
    tol: float,
    opts: SolveOptions,
) -> Tuple[MomentSequence, MomentMatrix, int]:
    current = gamma
    for step in range(1, depth + 1):
        current, plus = _extend_once(current, M, report, prior, tol, opts.rank_tol)
        M_plus = moment_matrix(current, plus)
        report_plus = psd_rank(M_plus, opts.psd_tol, opts.rank_tol)
        if not report_plus.is_psd:
            raise ExtensionError("psd", f"extension step {step} is not positive semidefinite",
                                 {"min_eigenvalue": report_plus.min_eigenvalue, "step": step})
        consistency = recursive_consistency(M_plus, current, report_plus, opts.consistency_tol, opts.rank_tol)
        if not consistency.consistent:
            raise ExtensionError(
                "consistency",
                f"extension step {step} breaks recursive consistency",
                {"violations": [v.to_dict() for v in consistency.violations], "step": step},
            )
        if is_verbose():
            console.print(f"[dim]extension step {step}: rank {report.rank} -> {report_plus.rank}[/dim]")
        if report_plus.rank == report.rank:
            return current, M_plus, step
        M, report = M_plus, report_plus

    raise ExtensionError(
        "flatness",
        f"no flat extension within {depth} step(s)",
        {"depth": depth, "rank": report.rank},
    )


def _failure(verdict: Verdict, certificate: SolveCertificate, witness: Dict[str, Any]) -> SolveCertificate:
    certificate.verdict = verdict
    certificate.witness = witness
    return certificate


def solve_tmp(
    gamma: MomentSequence,
    C: Optional[MonomialSet] = None,
    constraints: Sequence[Constraint] = (),
    opts: Optional[SolveOptions] = None,
    hint: Optional[Mapping[Sequence[int], float]] = None,
) -> SolveCertificate:
    """Decide whether ``gamma`` restricted to ``C`` has a representing measure on ``K``.

    ``K`` is ``{x : g(x) >= 0 for every constraint}``. On success the measure is
    finitely atomic and reproduces the data within ``opts.residual_tol``.

    Raises:
        StructureError: For an empty ``C`` or data without total mass
        MissingMomentError: If ``gamma`` lacks a moment ``C`` names
    """
    opts = opts or SolveOptions()
    C = C if C is not None else gamma.support
    if len(C) == 0:
        raise StructureError("monomial set is empty")
    nvars = gamma.nvars
    certificate = SolveCertificate(Verdict.REPRESENTABLE)

    zero = MultiIndex.zero(nvars)
    if zero not in C:
        certificate.warnings.append("monomial set lacks the unit; total mass gamma_0 added")
        C = C.union([zero])
    if not C.is_connected():
        certificate.warnings.append("monomial set is not connected")

    data = gamma.restrict(C)
    mass = data.mass
    if opts.probability:
        data = data.normalized()

    if C.max_degree >= 1:
        certificate.dominating_polynomial = dominate_space(C.max_degree, nvars)
    certificate.notes.append(GENERATION_NOTE)

    basis = maximal_moment_basis(data)
    M = moment_matrix(data, basis)
    report = psd_rank(M, opts.psd_tol, opts.rank_tol)
    certificate.basis, certificate.rank = basis, report.rank
    if is_verbose():
        console.print(f"[dim]moment matrix over {basis.labels()}: rank {report.rank}, "
                      f"min eigenvalue {report.min_eigenvalue:.3e}[/dim]")
    if not report.is_psd:
        return _failure(
            Verdict.PSD_FAILURE,
            certificate,
            {
                "stage": "moment_matrix",
                "min_eigenvalue": report.min_eigenvalue,
                "eigenvector": str(report.min_eigenvector),
            },
        )

    for constraint in constraints:
        sub, skipped = localizing_basis(data, constraint, basis)
        if skipped:
            certificate.untested[constraint.name] = [a.label() for a in skipped]
        if len(sub) == 0:
            continue
        local = psd_rank(localizing_matrix(data, constraint, sub), opts.psd_tol, opts.rank_tol)
        if not local.is_psd:
            return _failure(
                Verdict.LOCALIZING_FAILURE,
                certificate,
                {
                    "stage": "localizing_matrix",
                    "constraint": constraint.name,
                    "polynomial": str(constraint.g),
                    "min_eigenvalue": local.min_eigenvalue,
                    "eigenvector": str(local.min_eigenvector),
                },
            )

    consistency = recursive_consistency(M, data, report, opts.consistency_tol, opts.rank_tol)
    if not consistency.consistent:
        return _failure(
            Verdict.CONSISTENCY_FAILURE,
            certificate,
            {
                "stage": "recursive_consistency",
                "violations": [v.to_dict() for v in consistency.violations],
            },
        )

    flat_matrix, extended = M, data
    interior = basis.interior()
    directly_flat = (
        len(interior) > 0
        and psd_rank(M.principal(interior), opts.psd_tol, opts.rank_tol).rank == report.rank
    )
    if not directly_flat:
        if opts.depth < 1:
            return _failure(Verdict.DEPTH_EXHAUSTED, certificate, {
                "stage": "flatness",
                "depth": 0,
                "message": "moment matrix is not flat and no extension steps are allowed",
            })
        try:
            result = build_flat_extension(data, basis, opts.depth, opts.extension_tol, hint, opts)
        except ExtensionError as e:
            return _failure(Verdict.DEPTH_EXHAUSTED, certificate, {
                **e.detail, "stage": e.stage, "depth": opts.depth, "message": str(e),
            })
        flat_matrix, extended = result.matrix, result.extended
        certificate.extension_steps = result.steps
        certificate.extended_moments = MomentSequence(
            {zero: extended.mass, **{a: extended[a] for a in result.added}}, nvars
        )

    try:
        system = build_multiplication_system(flat_matrix, opts.rank_tol, opts.extension_tol)
        measure = extract_atoms(system, extended, opts)
    except ExtractionError as e:
        return _failure(Verdict.DEPTH_EXHAUSTED, certificate, {
            **e.detail, "stage": "extraction", "reason": e.reason, "message": str(e),
        })

    verification = verify_representation(data, measure, C, opts.residual_tol)
    certificate.residual = verification.max_residual
    if not verification.ok:
        return _failure(Verdict.DEPTH_EXHAUSTED, certificate, {"stage": "residual", **verification.to_dict()})

    outside = support_violations(measure, constraints, opts.point_tol)
    if outside:
        return _failure(Verdict.DEPTH_EXHAUSTED, certificate, {"stage": "support", "atoms": outside})

    if opts.probability:
        measure = measure.scaled(mass)
        if certificate.extended_moments is not None:
            certificate.extended_moments = certificate.extended_moments.scaled(mass)
    certificate.measure = measure
    return certificate


def frame_consistency(
    gammas: Sequence[MomentSequence],
    constraints: Sequence[Constraint] = (),
    opts: Optional[SolveOptions] = None,
) -> FrameReport:
    """Solve nested truncations of one functional and compare what they recover.

    Raises:
        NestingError: If some level's support does not contain the previous one
    """
    if not gammas:
        raise StructureError("a frame needs at least one level")
    for lower, upper in zip(gammas, gammas[1:]):
        if not lower.support.issubset(upper.support):
            raise NestingError("frame levels must have nested monomial sets")

    certificates = [solve_tmp(g, g.support, constraints, opts) for g in gammas]
    levels = [
        {
            "moments": len(g),
            "max_degree": g.support.max_degree,
            "verdict": c.verdict.value,
            "atoms": c.measure.size if c.measure else None,
        }
        for g, c in zip(gammas, certificates)
    ]

    shared = gammas[0].support
    recovered = [moments_of_atomic(c.measure, shared) for c in certificates if c.measure is not None]
    discrepancy = 0.0
    for i in range(len(recovered)):
        for j in range(i + 1, len(recovered)):
            for alpha in shared:
                a, b = recovered[i][alpha], recovered[j][alpha]
                discrepancy = max(discrepancy, abs(a - b) / max(1.0, abs(a)))

    return FrameReport(
        levels=levels,
        masses=[g.mass for g in gammas],
        shared_moment_max_discrepancy=discrepancy,
        all_solvable=all(c.representable for c in certificates),
        certificates=certificates,
    )
