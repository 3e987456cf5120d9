"""Subnormal completion for 2-variable weighted shifts.

A weight diagram assigns a horizontal weight ``alpha_k`` and a vertical
weight ``beta_k`` to each lattice point ``k = (k1, k2)``. The diagram
determines moments along staircase paths; a subnormal completion exists
when those moments come from a measure on the rectangle
``[0, a1] x [0, a2]``, and the completed weights are read back off the
measure's moments.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from rich.console import Console

from kmoment.core.config import SolveOptions, is_verbose
from kmoment.core.errors import MissingWeightError, StructureError
from kmoment.core.flat import SolveCertificate, solve_tmp
from kmoment.core.matrices import Constraint, localizing_matrix, moment_matrix, psd_rank
from kmoment.core.moments import AtomicMeasure, MomentSequence, moments_of_atomic
from kmoment.core.poly import MonomialSet, Polynomial, monomials_up_to

console = Console(stderr=True)

Lattice = Tuple[int, int]

# Completed weights must reproduce the given ones to this accuracy
WEIGHT_MATCH_TOL = 1e-6

DIRECTIONS = ("alpha", "beta")


class TailSpec(BaseModel):
    """Closed-form continuation of one row (``alpha``) or column (``beta``).

    ``line`` is the fixed coordinate: ``k2`` for a row, ``k1`` for a column.
    The last given weight on the line is repeated (``constant``) or multiplied
    by ``ratio`` per step (``geometric``).
    """

    model_config = ConfigDict(frozen=True)

    direction: Literal["alpha", "beta"]
    line: int = Field(0, ge=0)
    kind: Literal["constant", "geometric"] = "constant"
    ratio: float = Field(1.0, gt=0, le=1)


@dataclass(frozen=True, eq=False)
class WeightFamily:
    """Weights of a 2-variable weighted shift on a finite part of the lattice.

    Attributes:
        alpha: ``(k1, k2) -> alpha_k``, the weights in the first direction
        beta: ``(k1, k2) -> beta_k``, the weights in the second direction
        tails: Rows and columns that continue past the given weights
    """

    alpha: Mapping[Lattice, float]
    beta: Mapping[Lattice, float] = field(default_factory=dict)
    tails: Tuple[TailSpec, ...] = ()

    def __post_init__(self) -> None:
        for direction in DIRECTIONS:
            table = {(int(k[0]), int(k[1])): float(v) for k, v in getattr(self, direction).items()}
            for k, v in table.items():
                if min(k) < 0:
                    raise StructureError(f"{direction} weight index {k} is negative")
                if not 0 < v <= 1:
                    raise StructureError(f"{direction} weight at {k} must lie in (0, 1], got {v}")
            object.__setattr__(self, direction, table)
        object.__setattr__(self, "tails", tuple(self.tails))

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, Any]], tails: Sequence[TailSpec] = ()) -> "WeightFamily":
        """Build from ``{"direction", "k1", "k2", "weight"}`` records."""
        tables: Dict[str, Dict[Lattice, float]] = {"alpha": {}, "beta": {}}
        for record in records:
            direction = record["direction"]
            if direction not in tables:
                raise StructureError(f"unknown weight direction '{direction}'")
            tables[direction][(int(record["k1"]), int(record["k2"]))] = float(record["weight"])
        return cls(tables["alpha"], tables["beta"], tuple(tails))

    def records(self) -> List[Dict[str, Any]]:
        return [
            {"direction": direction, "k1": k[0], "k2": k[1], "weight": v}
            for direction in DIRECTIONS
            for k, v in sorted(getattr(self, direction).items(), key=lambda kv: (sum(kv[0]), -kv[0][0]))
        ]

    @property
    def degree(self) -> int:
        """Largest ``|k|`` carrying a weight."""
        return max((sum(k) for k in list(self.alpha) + list(self.beta)), default=-1)

    @property
    def norm_bounds(self) -> Tuple[float, float]:
        """Squared suprema of the given weights (the rectangle side lengths)."""
        a1 = max(self.alpha.values(), default=1.0) ** 2
        a2 = max(self.beta.values(), default=1.0) ** 2
        return a1, a2

    def restricted(self, m: int) -> "WeightFamily":
        """Weights with ``|k| <= m`` only, tails dropped."""
        keep = lambda t: {k: v for k, v in t.items() if sum(k) <= m}  # noqa: E731
        return WeightFamily(keep(self.alpha), keep(self.beta))

    def expanded(self, kmax: int) -> "WeightFamily":
        """Apply every tail so its line is populated for ``|k| <= kmax - 1``."""
        alpha, beta = dict(self.alpha), dict(self.beta)
        for tail in self.tails:
            table = alpha if tail.direction == "alpha" else beta
            along = 0 if tail.direction == "alpha" else 1
            given = [k for k in table if k[1 - along] == tail.line]
            if not given:
                raise StructureError(f"tail on {tail.direction} line {tail.line} has no weights to continue")
            last = max(given, key=lambda k: k[along])
            start, value = last[along], table[last]
            for step in range(start + 1, kmax - tail.line):
                power = step - start
                k = (step, tail.line) if along == 0 else (tail.line, step)
                if k not in table:
                    table[k] = value * (tail.ratio ** power if tail.kind == "geometric" else 1.0)
        return WeightFamily(alpha, beta)

    def line(self, direction: str, line: int, count: int) -> Optional[List[float]]:
        """The first ``count`` weights along a row or column, or None if one is missing."""
        table = self.alpha if direction == "alpha" else self.beta
        keys = [(j, line) if direction == "alpha" else (line, j) for j in range(count)]
        if any(k not in table for k in keys):
            return None
        return [table[k] for k in keys]


@dataclass(frozen=True)
class CommutativityReport:
    ok: bool
    violations: List[Lattice]

    def to_dict(self) -> Dict[str, Any]:
        return {"ok": self.ok, "violations": [list(k) for k in self.violations]}


@dataclass(frozen=True)
class BergerReport:
    """Necessary subnormality test for a 1-variable weight sequence."""

    subnormal_consistent: bool
    failing_hankel: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"subnormal_consistent": self.subnormal_consistent, "failing_hankel": self.failing_hankel}


@dataclass
class ScpResult:
    """Outcome of a completion attempt.

    Attributes:
        certificate: Solve certificate (None when refused before solving)
        completed_weights: Weights read back from the representing measure
        norms: ``(a1, a2)``, the squared weight suprema bounding the support
        refusal: Why the diagram was refused, when a precondition failed
        mismatches: Input weights the completion does not reproduce
    """

    certificate: Optional[SolveCertificate]
    completed_weights: Optional[WeightFamily] = None
    norms: Tuple[float, float] = (1.0, 1.0)
    refusal: Optional[Dict[str, Any]] = None
    mismatches: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.completed_weights is not None and not self.mismatches

    @property
    def exit_code(self) -> int:
        if self.refusal is not None or self.certificate is None:
            return 2
        return self.certificate.verdict.exit_code if not self.mismatches else 2

    def to_dict(self) -> Dict[str, Any]:
        return {
            "refusal": self.refusal,
            "norms": list(self.norms),
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "completed_weights": self.completed_weights.records() if self.completed_weights else None,
            "mismatches": self.mismatches,
        }


def moments_from_weights(w: WeightFamily, kmax: int, strict: bool = True) -> MomentSequence:
    """Moments ``gamma_k`` for ``|k| <= kmax`` along the path ``(0,0) -> (k1,0) -> (k1,k2)``.

    ``gamma_k`` is the product of ``alpha^2`` over the horizontal leg and
    ``beta^2`` over the vertical leg. With no ``beta`` weights only the
    ``k2 = 0`` moments are produced.

    Raises:
        MissingWeightError: In strict mode, for the first weight a path lacks
    """
    single = not w.beta
    values: Dict[Lattice, float] = {}
    for k1, k2 in monomials_up_to(2, kmax):
        if single and k2:
            continue
        try:
            values[(k1, k2)] = _path_moment(w, k1, k2)
        except MissingWeightError:
            if strict:
                raise
    return MomentSequence(values, 2)


def _path_moment(w: WeightFamily, k1: int, k2: int) -> float:
    gamma = 1.0
    for i in range(k1):
        if (i, 0) not in w.alpha:
            raise MissingWeightError("alpha", (i, 0))
        gamma *= w.alpha[(i, 0)] ** 2
    for j in range(k2):
        if (k1, j) not in w.beta:
            raise MissingWeightError("beta", (k1, j))
        gamma *= w.beta[(k1, j)] ** 2
    return gamma


def weights_from_moments(gamma: MomentSequence, floor: float = 1e-9) -> WeightFamily:
    """``alpha_k^2 = gamma_{k+e1} / gamma_k`` and ``beta_k^2 = gamma_{k+e2} / gamma_k`` where defined.

    Indices with ``gamma_k <= floor`` are skipped; the ratios are clipped into
    ``(0, 1]`` only against roundoff.
    """
    alpha: Dict[Lattice, float] = {}
    beta: Dict[Lattice, float] = {}
    for k, value in gamma.items():
        if value <= floor:
            continue
        for table, step in ((alpha, (1, 0)), (beta, (0, 1))):
            nxt = gamma.get((k[0] + step[0], k[1] + step[1]))
            if nxt is None or nxt <= floor:
                continue
            ratio = nxt / value
            if ratio > 1 + WEIGHT_MATCH_TOL:
                continue
            table[(k[0], k[1])] = math.sqrt(min(ratio, 1.0))
    return WeightFamily(alpha, beta)


def commutativity_check(w: WeightFamily, tol: float = 1e-7) -> CommutativityReport:
    """``beta_{k+e1} alpha_k = alpha_{k+e2} beta_k`` wherever all four weights exist."""
    violations = []
    for k in sorted(w.alpha, key=lambda k: (sum(k), -k[0])):
        right, up = (k[0] + 1, k[1]), (k[0], k[1] + 1)
        if right in w.beta and up in w.alpha and k in w.beta:
            lhs = w.beta[right] * w.alpha[k]
            rhs = w.alpha[up] * w.beta[k]
            if abs(lhs - rhs) > tol * max(1.0, abs(lhs), abs(rhs)):
                violations.append(k)
    return CommutativityReport(not violations, violations)


def berger_check(
    omega: Sequence[float], kmax: int, tol: float = 1e-9, norm: Optional[float] = None
) -> BergerReport:
    """Truncated Berger test: moment PSD conditions for a measure on ``[0, norm]``.

    Builds ``gamma_k = omega_0^2 ... omega_{k-1}^2`` for ``k <= kmax`` and checks
    the Hankel matrix and the shifted Hankel matrix. The localizing matrix of
    ``norm - t`` is added only when ``norm`` is given; it must bound every
    squared weight of the whole sequence, not only the ones passed in.
    """
    if kmax > len(omega):
        raise StructureError(f"kmax {kmax} needs {kmax} weights, got {len(omega)}")
    values = {(0,): 1.0}
    gamma = 1.0
    for k in range(1, kmax + 1):
        gamma *= omega[k - 1] ** 2
        values[(k,)] = gamma
    moments = MomentSequence(values, 1)
    t = Polynomial.variable(0, 1)

    checks = [("hankel", moment_matrix(moments, MonomialSet.triangular(1, kmax // 2)))]
    if kmax >= 1:
        shifted = MonomialSet.triangular(1, (kmax - 1) // 2)
        checks.append(("shifted_hankel", localizing_matrix(moments, t, shifted)))
        if norm is not None:
            checks.append(("norm_localizing", localizing_matrix(moments, norm - t, shifted)))

    for name, matrix in checks:
        report = psd_rank(matrix, psd_tol=tol)
        if not report.is_psd:
            return BergerReport(
                False,
                {"matrix": name, "min_eigenvalue": report.min_eigenvalue, "entries": matrix.to_lists()},
            )
    return BergerReport(True)


def _propagated(w: WeightFamily, depth: int) -> WeightFamily:
    """Fill every missing weight with ``|k| <= depth`` by copying a neighbour."""
    alpha, beta = dict(w.alpha), dict(w.beta)
    for k1, k2 in monomials_up_to(2, depth):
        k = (k1, k2)
        if k not in alpha:
            alpha[k] = alpha.get((k1 - 1, k2)) or alpha.get((k1, k2 - 1)) or 1.0
        if k not in beta:
            beta[k] = beta.get((k1, k2 - 1)) or beta.get((k1 - 1, k2)) or 1.0
    return WeightFamily(alpha, beta)


def _box_constraints(a1: float, a2: float, single: bool) -> List[Constraint]:
    if single:
        s = Polynomial.variable(0, 1)
        return [Constraint(g=s, name="s"), Constraint(g=a1 - s, name="a1-s")]
    s, t = Polynomial.variable(0, 2), Polynomial.variable(1, 2)
    return [
        Constraint(g=s, name="s"),
        Constraint(g=a1 - s, name="a1-s"),
        Constraint(g=t, name="t"),
        Constraint(g=a2 - t, name="a2-t"),
    ]


def _berger_refusal(full: WeightFamily, tails: Sequence[TailSpec], tol: float) -> Optional[Dict[str, Any]]:
    """Berger-test every row and column populated from index 0.

    Only a tailed line has a known supremum, so only there is the weight norm
    used as a support bound.
    """
    tailed = {(t.direction, t.line) for t in tails}
    for direction in DIRECTIONS:
        table = getattr(full, direction)
        along = 0 if direction == "alpha" else 1
        for line in sorted({k[1 - along] for k in table}):
            count = 0
            while full.line(direction, line, count + 1) is not None:
                count += 1
            if count == 0:
                continue
            norm = None
            if (direction, line) in tailed:
                norm = max(v for k, v in table.items() if k[1 - along] == line) ** 2
            berger = berger_check(full.line(direction, line, count), count, tol, norm)
            if not berger.subnormal_consistent:
                return {"reason": "berger", "direction": direction, "line": line, **berger.to_dict()}
    return None


def scp_solve(w: WeightFamily, opts: Optional[SolveOptions] = None, kmax: Optional[int] = None) -> ScpResult:
    """Try to complete a weight diagram to a subnormal 2-variable weighted shift.

    Moments through ``kmax`` (default one above the largest given ``|k|``) go
    through ``solve_tmp`` on the rectangle ``[0, a1] x [0, a2]``. Refusals for
    non-commuting diagrams or rows failing the Berger test are returned, not
    raised.
    """
    opts = opts or SolveOptions()
    kmax = kmax if kmax is not None else w.degree + 1
    if kmax < 1:
        raise StructureError("weight diagram is empty")

    commuting = commutativity_check(w, opts.commute_tol)
    if not commuting.ok:
        return ScpResult(None, refusal={"reason": "commutativity", **commuting.to_dict()})

    full = w.expanded(kmax)
    refusal = _berger_refusal(full, w.tails, opts.psd_tol)
    if refusal is not None:
        return ScpResult(None, refusal=refusal)

    gamma = moments_from_weights(full, kmax, strict=False)
    a1, a2 = full.norm_bounds
    single = not full.beta
    hint = moments_from_weights(_propagated(full, 2 * kmax + 2), 2 * kmax + 3, strict=False)
    if single:
        # A lone row is a 1-variable problem on [0, a1]; atoms are lifted back onto the s-axis
        gamma = MomentSequence({(k[0],): v for k, v in gamma.items()}, 1)
        prior = {(k[0],): v for k, v in hint.items() if k[1] == 0}
    else:
        prior = hint.values

    certificate = solve_tmp(gamma, gamma.support, _box_constraints(a1, a2, single), opts, hint=prior)
    if not certificate.representable or certificate.measure is None:
        return ScpResult(certificate, norms=(a1, a2))

    measure = certificate.measure
    span = MonomialSet.triangular(2, kmax + 1)
    if single:
        measure = AtomicMeasure(np.column_stack([measure.atoms[:, 0], np.zeros(measure.size)]), measure.weights)
        certificate.measure = measure
        span = MonomialSet([k for k in span if k[1] == 0], 2)
    completed = weights_from_moments(moments_of_atomic(measure, span), opts.weight_floor)

    mismatches = []
    for direction in DIRECTIONS:
        given, found = getattr(full, direction), getattr(completed, direction)
        for k, v in given.items():
            if sum(k) >= kmax:
                continue
            got = found.get(k)
            if got is None or abs(got - v) > WEIGHT_MATCH_TOL:
                mismatches.append({"direction": direction, "k": list(k), "given": v, "completed": got})

    if is_verbose():
        console.print(f"[dim]completion over |k| <= {kmax}: {len(mismatches)} mismatched weight(s)[/dim]")
    return ScpResult(certificate, completed, (a1, a2), mismatches=mismatches)


def weight_diagram(w: WeightFamily, kmax: Optional[int] = None, width: int = 9) -> str:
    """Fixed-width picture of the lattice: ``alpha`` to the right of each node, ``beta`` above it."""
    kmax = kmax if kmax is not None else w.degree + 1
    lines = []
    for k2 in range(kmax, -1, -1):
        row = ""
        for k1 in range(kmax - k2 + 1):
            a = w.alpha.get((k1, k2))
            gap = f"{a:^{width}.4f}" if a is not None and k1 < kmax - k2 else " " * width
            row += "o" + (gap if k1 < kmax - k2 else "")
        lines.append(row.rstrip())
        if k2 > 0:
            above = ""
            for k1 in range(kmax - k2 + 1):
                b = w.beta.get((k1, k2 - 1))
                above += (f"{b:.4f}" if b is not None else "|").ljust(width + 1)
            lines.append(above.rstrip())
    return "\n".join(lines)
