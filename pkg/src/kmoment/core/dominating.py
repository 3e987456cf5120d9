"""Dominating polynomials and the positive-part norm on compact grids.

A polynomial ``p >= 1`` dominates a space of polynomials when every member
``b`` has ``|b / p|`` bounded. ``dominate_monomial`` builds one explicit
dominator per monomial through the arithmetic-geometric mean inequality,
and ``dominate_space`` adds them up for all monomials of bounded degree.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from kmoment.core.config import GridSpec
from kmoment.core.errors import DimensionMismatchError, StructureError
from kmoment.core.poly import MultiIndex, Polynomial, monomials_up_to

DEFAULT_RADII = (1.0, 10.0, 100.0, 1000.0)

# A ratio growing by at least this factor per decade of radius is unbounded
GROWTH_FACTOR = 2.0


@dataclass(frozen=True, eq=False)
class GridK:
    """Finite sample standing in for a compact set ``K``.

    Attributes:
        points: ``(m, n)`` array, ``m >= 1``
        description: Where the points came from
    """

    points: np.ndarray
    description: str = "explicit points"

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[0] == 0:
            raise StructureError("a grid needs at least one point")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @classmethod
    def box(cls, lo: float, hi: float, steps: int, nvars: int) -> "GridK":
        """Tensor grid on ``[lo, hi]^nvars`` with ``steps`` points per axis."""
        if steps < 1 or hi < lo:
            raise StructureError(f"invalid grid [{lo}, {hi}] with {steps} steps")
        axis = np.linspace(lo, hi, steps)
        mesh = np.meshgrid(*([axis] * nvars), indexing="ij")
        points = np.column_stack([m.ravel() for m in mesh])
        return cls(points, f"box [{lo:g}, {hi:g}]^{nvars}, {steps} points per axis")

    @classmethod
    def from_spec(cls, spec: GridSpec, nvars: int) -> "GridK":
        return cls.box(spec.lo, spec.hi, spec.steps, nvars)

    @property
    def nvars(self) -> int:
        return int(self.points.shape[1])

    def __len__(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class BoundednessReport:
    """Sampled evidence for ``sup |b / p| < inf``.

    ``trend_bounded`` false is a counterexample; true is only evidence.
    """

    sup_estimate: float
    trend_bounded: bool
    radial_ratios: Dict[float, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {
            "sup_estimate": self.sup_estimate,
            "trend_bounded": self.trend_bounded,
            "radial_ratios": {str(r): v for r, v in self.radial_ratios.items()},
        }


def _one_plus_square(i: int, nvars: int) -> Polynomial:
    return Polynomial.constant(1.0, nvars) + Polynomial.variable(i, nvars) ** 2


def dominate_monomial(alpha: Sequence[int]) -> Polynomial:
    """Explicit ``p >= 1`` with ``|x^alpha| <= p(x)`` everywhere.

    Write ``alpha = g + 2 b`` with ``g`` a 0/1 vector. For ``g = 0`` the result
    is ``prod (1 + X_i^2)^b_i``; otherwise it is
    ``(1/|g|) sum_i g_i (1 + X_i^2)^ceil((|g| + 1) / 2) * prod (1 + X_i^2)^b_i``.

    Raises:
        StructureError: For the zero multi-index
    """
    alpha = MultiIndex(alpha)
    nvars = alpha.nvars
    if alpha.degree == 0:
        raise StructureError("the unit monomial needs no dominator")

    odd = [a % 2 for a in alpha]
    half = [(a - g) // 2 for a, g in zip(alpha, odd)]

    tail = Polynomial.constant(1.0, nvars)
    for i, b in enumerate(half):
        if b:
            tail = tail * _one_plus_square(i, nvars) ** b

    size = sum(odd)
    if size == 0:
        return tail

    power = math.ceil((size + 1) / 2)
    head = Polynomial.zero(nvars)
    for i, g in enumerate(odd):
        if g:
            head = head + _one_plus_square(i, nvars) ** power
    return (head / size) * tail


def dominate_space(k: int, nvars: int) -> Polynomial:
    """``1 + sum`` of the monomial dominators over ``1 <= |alpha| <= k``.

    The result has degree at most ``k + 1`` for odd ``k`` and ``k + 2`` for even ``k``.
    """
    if k < 1:
        raise StructureError(f"degree must be at least 1, got {k}")
    total = Polynomial.constant(1.0, nvars)
    for alpha in monomials_up_to(nvars, k):
        if alpha.degree:
            total = total + dominate_monomial(alpha)
    return total


def _radial_directions(nvars: int) -> np.ndarray:
    axes = [sign * np.eye(nvars)[i] for i in range(nvars) for sign in (1.0, -1.0)]
    diagonals = [np.array(s) / math.sqrt(nvars) for s in itertools.product((1.0, -1.0), repeat=nvars)]
    return np.array(axes + (diagonals if nvars > 1 else []))


def _ratios(b: Polynomial, p: Polynomial, points: np.ndarray) -> np.ndarray:
    denominators = p.evaluate_many(points)
    if np.any(denominators <= 0):
        bad = points[int(np.argmin(denominators))]
        raise StructureError(f"dominating polynomial is not positive at {bad.tolist()}")
    return np.abs(b.evaluate_many(points)) / denominators


def boundedness_check(
    b: Polynomial,
    p: Polynomial,
    sample: Optional[GridK] = None,
    radii: Sequence[float] = DEFAULT_RADII,
) -> BoundednessReport:
    """Estimate ``sup |b / p|`` on a sample and along rays of growing radius.

    The ray test compares the worst ratio at ten times the largest radius with
    the worst ratio at the largest radius; growth by ``GROWTH_FACTOR`` or more
    means ``b / p`` is unbounded.

    Raises:
        StructureError: If ``p <= 0`` at a sampled point
    """
    if b.nvars != p.nvars:
        raise DimensionMismatchError(p.nvars, b.nvars, "polynomial")
    nvars = p.nvars
    if sample is not None and sample.nvars != nvars:
        raise DimensionMismatchError(nvars, sample.nvars, "grid")
    if not radii:
        raise StructureError("radial sweep needs at least one radius")

    directions = _radial_directions(nvars)
    sweep = sorted(float(r) for r in radii)
    ratios: Dict[float, float] = {}
    for r in sweep + [10.0 * sweep[-1]]:
        ratios[r] = float(np.max(_ratios(b, p, r * directions)))

    sup = max(ratios[r] for r in sweep)
    if sample is not None:
        sup = max(sup, float(np.max(_ratios(b, p, sample.points))))

    last, beyond = ratios[sweep[-1]], ratios[10.0 * sweep[-1]]
    bounded = beyond <= GROWTH_FACTOR * last or beyond == 0.0
    return BoundednessReport(sup, bool(bounded), ratios)


def positive_part_norm(a: Polynomial, K: GridK) -> float:
    """``max_{x in K} max(0, a(x))``."""
    if a.nvars != K.nvars:
        raise DimensionMismatchError(K.nvars, a.nvars, "grid")
    return max(0.0, float(np.max(a.evaluate_many(K.points))))


def domination_table(p: Polynomial, K: GridK, degree: int) -> List[Tuple[MultiIndex, float]]:
    """For each monomial of degree ``1..degree``, the grid maximum of ``|x^alpha| - p``."""
    values = p.evaluate_many(K.points)
    rows = []
    for alpha in monomials_up_to(K.nvars, degree):
        if alpha.degree == 0:
            continue
        powers = np.abs(np.prod(K.points ** np.asarray(alpha), axis=1))
        rows.append((alpha, float(np.max(powers - values))))
    return rows
