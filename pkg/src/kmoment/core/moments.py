"""Moment sequences, atomic measures and the Riesz functional.

``moments_of_atomic`` is the brute-force integration oracle every round-trip
check in the package is measured against.
"""

import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from kmoment.core.errors import DimensionMismatchError, MissingMomentError, StructureError
from kmoment.core.poly import MonomialSet, MultiIndex, Polynomial, grlex_key, variable_names

# Atoms closer than this (Euclidean) are treated as one atom
MERGE_TOL = 1e-7


class MomentSequence:
    """Finite moment data ``gamma_alpha`` indexed by a monomial set.

    The unit monomial must be present with positive value (the total mass).
    Values are not normalized; ``gamma_0 = 1`` is only imposed when a caller
    rescales explicitly.
    """

    __slots__ = ("_support", "_values")

    def __init__(self, values: Mapping[Sequence[int], float], nvars: Optional[int] = None):
        support = MonomialSet(values.keys(), nvars)
        zero = MultiIndex.zero(support.nvars)
        if zero not in support:
            raise StructureError("moment data must contain the total mass gamma_0")
        canonical = {MultiIndex(a): float(v) for a, v in values.items()}
        if not canonical[zero] > 0:
            raise StructureError(f"total mass gamma_0 must be positive, got {canonical[zero]}")
        if not all(np.isfinite(v) for v in canonical.values()):
            raise StructureError("moment values must be finite")
        self._support = support
        self._values = canonical

    @property
    def support(self) -> MonomialSet:
        return self._support

    @property
    def nvars(self) -> int:
        return self._support.nvars

    @property
    def values(self) -> Dict[MultiIndex, float]:
        return dict(self._values)

    @property
    def mass(self) -> float:
        return self._values[MultiIndex.zero(self.nvars)]

    def __len__(self) -> int:
        return len(self._support)

    def __contains__(self, alpha: object) -> bool:
        return alpha in self._support

    def __getitem__(self, alpha: Sequence[int]) -> float:
        key = tuple(alpha)
        if key not in self._values:
            raise MissingMomentError([key])
        return self._values[key]  # type: ignore[index]

    def get(self, alpha: Sequence[int], default: Optional[float] = None) -> Optional[float]:
        return self._values.get(tuple(alpha), default)  # type: ignore[call-overload]

    def has_all(self, indices: Iterable[Sequence[int]]) -> bool:
        return all(tuple(a) in self._values for a in indices)

    def items(self) -> List[Tuple[MultiIndex, float]]:
        return [(a, self._values[a]) for a in self._support]

    def restrict(self, C: MonomialSet) -> "MomentSequence":
        """Keep only the moments indexed by ``C`` (all of which must exist)."""
        missing = [a for a in C if a not in self._values]
        if missing:
            raise MissingMomentError(missing)
        return MomentSequence({a: self._values[a] for a in C}, self.nvars)

    def extend(self, new_values: Mapping[Sequence[int], float]) -> "MomentSequence":
        """Add moments; existing entries are kept."""
        merged: Dict[Sequence[int], float] = {MultiIndex(a): float(v) for a, v in new_values.items()}
        merged.update(self._values)
        return MomentSequence(merged, self.nvars)

    def scaled(self, factor: float) -> "MomentSequence":
        return MomentSequence({a: v * factor for a, v in self._values.items()}, self.nvars)

    def normalized(self) -> "MomentSequence":
        """Rescale to total mass one."""
        return self.scaled(1.0 / self.mass)

    def translated(self, shift: Sequence[float]) -> "MomentSequence":
        """Moments of the measure pushed forward by ``x -> x + shift``.

        ``gamma'_alpha = sum_{beta <= alpha} prod_i C(alpha_i, beta_i) shift_i^(alpha_i - beta_i) gamma_beta``,
        so every ``beta <= alpha`` must be present for each ``alpha`` in the support.

        Raises:
            MissingMomentError: If the support is not downward closed
        """
        shift = [float(s) for s in shift]
        if len(shift) != self.nvars:
            raise DimensionMismatchError(self.nvars, len(shift), "shift")
        moved: Dict[MultiIndex, float] = {}
        for alpha in self._support:
            total = 0.0
            for beta in itertools.product(*(range(a + 1) for a in alpha)):
                coefficient = 1.0
                for a, b, s in zip(alpha, beta, shift):
                    coefficient *= math.comb(a, b) * s ** (a - b)
                if coefficient != 0.0:
                    total += coefficient * self[beta]
            moved[alpha] = total
        return MomentSequence(moved, self.nvars)

    def records(self) -> List[Dict[str, object]]:
        """``[{"index": [...], "value": v}, ...]`` in graded-lex order."""
        return [{"index": list(a), "value": v} for a, v in self.items()]

    def __repr__(self) -> str:
        return f"MomentSequence({len(self)} moments, nvars={self.nvars}, mass={self.mass:g})"


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finitely atomic measure ``sum_i lambda_i delta_{x_i}``.

    Attributes:
        atoms: ``(m, n)`` array of pairwise distinct points
        weights: ``(m,)`` array of strictly positive weights
    """

    atoms: np.ndarray
    weights: np.ndarray
    merge_tol: float = field(default=MERGE_TOL, compare=False)

    def __post_init__(self) -> None:
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        atoms = _as_points(self.atoms, weights.size)
        if atoms.shape[0] != weights.shape[0]:
            raise StructureError(
                f"{atoms.shape[0]} atoms but {weights.shape[0]} weights"
            )
        if np.any(weights <= 0):
            raise StructureError("atomic weights must be strictly positive")
        for i in range(atoms.shape[0]):
            for j in range(i):
                if np.linalg.norm(atoms[i] - atoms[j]) <= self.merge_tol:
                    raise StructureError(
                        f"atoms {i} and {j} are closer than {self.merge_tol}; "
                        "use AtomicMeasure.merged to combine them"
                    )
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def merged(
        cls,
        atoms: Sequence[Sequence[float]],
        weights: Sequence[float],
        merge_tol: float = MERGE_TOL,
    ) -> "AtomicMeasure":
        """Build a measure, summing the weights of atoms within ``merge_tol``."""
        masses = np.atleast_1d(np.asarray(weights, dtype=float))
        points = _as_points(atoms, masses.size)
        kept_points: List[np.ndarray] = []
        kept_weights: List[float] = []
        for x, w in zip(points, masses):
            for k, y in enumerate(kept_points):
                if np.linalg.norm(x - y) <= merge_tol:
                    total = kept_weights[k] + w
                    if total != 0:
                        kept_points[k] = (kept_weights[k] * y + w * x) / total
                    kept_weights[k] = total
                    break
            else:
                kept_points.append(x.copy())
                kept_weights.append(float(w))
        nvars = points.shape[1]
        return cls(
            np.array(kept_points).reshape(len(kept_points), nvars),
            np.array(kept_weights),
            merge_tol,
        )

    @property
    def nvars(self) -> int:
        return int(self.atoms.shape[1])

    @property
    def size(self) -> int:
        return int(self.atoms.shape[0])

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def integrate(self, p: Polynomial) -> float:
        """``sum_i lambda_i p(x_i)``."""
        if p.nvars != self.nvars:
            raise DimensionMismatchError(self.nvars, p.nvars, "polynomial")
        return float(self.weights @ p.evaluate_many(self.atoms))

    def scaled(self, factor: float) -> "AtomicMeasure":
        return AtomicMeasure(self.atoms, self.weights * factor, self.merge_tol)

    def sorted(self) -> "AtomicMeasure":
        """Atoms in lexicographic coordinate order (for stable output).

        Coordinates are compared after rounding to ``merge_tol``, so roundoff
        in a leading coordinate does not decide the order.
        """
        if not self.size:
            return self
        keys = np.round(self.atoms / self.merge_tol)
        order = np.lexsort(keys.T[::-1])
        return AtomicMeasure(self.atoms[order], self.weights[order], self.merge_tol)

    def to_csv(self, names: Optional[Sequence[str]] = None) -> str:
        """Atom table as CSV: one coordinate column per variable, then the weight."""
        names = list(names or variable_names(self.nvars))
        buffer = io.StringIO()
        data = np.column_stack([self.atoms, self.weights]) if self.size else np.zeros((0, self.nvars + 1))
        np.savetxt(buffer, data, delimiter=",", header=",".join(names + ["weight"]), comments="", fmt="%.17g")
        return buffer.getvalue()


def moments_of_atomic(mu: AtomicMeasure, C: MonomialSet) -> MomentSequence:
    """Integrate every monomial of ``C`` against an atomic measure.

    Args:
        mu: The measure
        C: Monomials to integrate; must contain the unit

    Returns:
        ``gamma_alpha = sum_i lambda_i x_i^alpha`` for each ``alpha`` in ``C``

    Raises:
        DimensionMismatchError: If the atoms and ``C`` disagree on the dimension
    """
    if mu.nvars != C.nvars:
        raise DimensionMismatchError(C.nvars, mu.nvars, "atom")
    values = {}
    for alpha in C:
        powers = np.prod(mu.atoms ** np.asarray(alpha), axis=1) if mu.size else np.zeros(0)
        values[alpha] = float(mu.weights @ powers)
    return MomentSequence(values, C.nvars)


def riesz_eval(gamma: MomentSequence, p: Polynomial) -> float:
    """Apply the Riesz functional ``p -> sum_alpha p_alpha gamma_alpha``.

    Raises:
        MissingMomentError: Naming every monomial of ``p`` without a moment
    """
    if p.nvars != gamma.nvars:
        raise DimensionMismatchError(gamma.nvars, p.nvars, "polynomial")
    terms = p.terms
    missing = [a for a in terms if a not in gamma]
    if missing:
        raise MissingMomentError(missing)
    return float(sum(c * gamma[a] for a, c in sorted(terms.items(), key=lambda t: grlex_key(t[0]))))


def _as_points(atoms: object, count: int) -> np.ndarray:
    """Coerce atoms to an ``(m, n)`` array; a flat list of ``count`` numbers is 1-D data."""
    raw = np.array(atoms, dtype=float)
    if raw.ndim == 2:
        return raw.copy()
    if raw.ndim == 1:
        return raw.reshape(-1, 1) if raw.size == count else raw.reshape(1, -1)
    if raw.ndim == 0:
        return raw.reshape(1, 1)
    raise StructureError(f"atoms must be a 2-D array, got shape {raw.shape}")
