"""Multi-indices, sparse polynomials and monomial sets.

Monomials are identified with their exponent vectors. Every ordered
collection of monomials uses the graded-lexicographic order: lower total
degree first, ties broken so that ``s`` precedes ``t`` (the column order
``1, s, t, s^2, st, t^2, ...`` of a two-variable moment matrix).
"""

import itertools
import math
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from kmoment.core.errors import DimensionMismatchError, StructureError

# Coefficients smaller than this are dropped after arithmetic
COEFF_EPS = 1e-15


class MultiIndex(tuple):
    """Exponent vector of a monomial ``x^alpha``.

    A ``MultiIndex`` is a tuple of nonnegative ints, so it hashes and compares
    equal to the plain tuple with the same entries.
    """

    def __new__(cls, exponents: Iterable[int]) -> "MultiIndex":
        values = tuple(int(e) for e in exponents)
        if any(e < 0 for e in values):
            raise StructureError(f"negative exponent in multi-index {values}")
        return super().__new__(cls, values)

    @classmethod
    def zero(cls, nvars: int) -> "MultiIndex":
        return cls((0,) * nvars)

    @classmethod
    def unit(cls, i: int, nvars: int) -> "MultiIndex":
        return cls(1 if j == i else 0 for j in range(nvars))

    @property
    def nvars(self) -> int:
        return len(self)

    @property
    def degree(self) -> int:
        return sum(self)

    def plus(self, other: Sequence[int]) -> "MultiIndex":
        """Exponent of the product ``x^self * x^other``."""
        if len(other) != len(self):
            raise DimensionMismatchError(len(self), len(other), "multi-index")
        return MultiIndex(a + b for a, b in zip(self, other))

    def minus(self, other: Sequence[int]) -> Optional["MultiIndex"]:
        """Exponent of ``x^self / x^other``, or None if it is not a monomial."""
        diff = [a - b for a, b in zip(self, other)]
        if any(d < 0 for d in diff):
            return None
        return MultiIndex(diff)

    def divides(self, other: Sequence[int]) -> bool:
        return all(a <= b for a, b in zip(self, other))

    def predecessors(self) -> List["MultiIndex"]:
        """Indices obtained by lowering one positive coordinate by one."""
        return [
            MultiIndex(e - 1 if j == i else e for j, e in enumerate(self))
            for i, e in enumerate(self)
            if e > 0
        ]

    def successors(self) -> List["MultiIndex"]:
        """Indices obtained by raising one coordinate by one."""
        return [self.plus(MultiIndex.unit(i, len(self))) for i in range(len(self))]

    def label(self, names: Optional[Sequence[str]] = None) -> str:
        """Human-readable monomial, e.g. ``s^2t`` or ``1``."""
        names = names or variable_names(len(self))
        parts = []
        for name, e in zip(names, self):
            if e == 1:
                parts.append(name)
            elif e > 1:
                parts.append(f"{name}^{e}")
        if not parts:
            return "1"
        # Multi-letter names need a separator to stay readable
        separator = "*" if any(len(n) > 1 for n in names) else ""
        return separator.join(parts)

    def __repr__(self) -> str:
        return f"MultiIndex({tuple(self)})"


def grlex_key(alpha: Sequence[int]) -> Tuple[int, Tuple[int, ...]]:
    """Sort key for graded-lexicographic order."""
    return (sum(alpha), tuple(-e for e in alpha))


def variable_names(nvars: int) -> List[str]:
    """Default variable names: ``X``, ``s, t`` or ``X1..Xn``."""
    if nvars == 1:
        return ["X"]
    if nvars == 2:
        return ["s", "t"]
    return [f"X{i + 1}" for i in range(nvars)]


def monomials_up_to(nvars: int, degree: int) -> List[MultiIndex]:
    """All multi-indices of total degree at most ``degree`` in graded-lex order."""
    result = [
        MultiIndex(e)
        for e in itertools.product(range(degree + 1), repeat=nvars)
        if sum(e) <= degree
    ]
    return sorted(result, key=grlex_key)


def monomials_of_degree(nvars: int, degree: int) -> List[MultiIndex]:
    """All multi-indices of total degree exactly ``degree`` in graded-lex order."""
    return [a for a in monomials_up_to(nvars, degree) if a.degree == degree]


class Polynomial:
    """Sparse real polynomial in ``nvars`` variables.

    Terms are stored as a map from exponent vectors to coefficients; zero
    coefficients are never stored. Instances are immutable.
    """

    __slots__ = ("_terms", "_nvars")

    def __init__(self, terms: Mapping[Sequence[int], float], nvars: Optional[int] = None):
        canonical: Dict[MultiIndex, float] = {}
        for alpha, coeff in terms.items():
            index = MultiIndex(alpha)
            if nvars is None:
                nvars = len(index)
            elif len(index) != nvars:
                raise DimensionMismatchError(nvars, len(index), "multi-index")
            canonical[index] = canonical.get(index, 0.0) + float(coeff)
        if nvars is None:
            raise StructureError("cannot infer the number of variables of an empty polynomial")
        self._nvars = nvars
        self._terms = {a: c for a, c in canonical.items() if abs(c) >= COEFF_EPS}

    # Constructors

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls({}, nvars)

    @classmethod
    def constant(cls, value: float, nvars: int) -> "Polynomial":
        return cls({MultiIndex.zero(nvars): value}, nvars)

    @classmethod
    def monomial(cls, alpha: Sequence[int], coeff: float = 1.0) -> "Polynomial":
        return cls({MultiIndex(alpha): coeff}, len(alpha))

    @classmethod
    def variable(cls, i: int, nvars: int) -> "Polynomial":
        return cls.monomial(MultiIndex.unit(i, nvars))

    @classmethod
    def from_vector(cls, coeffs: Sequence[float], basis: "MonomialSet", zero_tol: float = 0.0) -> "Polynomial":
        """Polynomial whose coefficient on ``basis[i]`` is ``coeffs[i]``."""
        if len(coeffs) != len(basis):
            raise DimensionMismatchError(len(basis), len(coeffs), "coefficient vector")
        return cls(
            {alpha: c for alpha, c in zip(basis, coeffs) if abs(c) > zero_tol},
            basis.nvars,
        )

    # Accessors

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def terms(self) -> Dict[MultiIndex, float]:
        return dict(self._terms)

    def monomials(self) -> List[MultiIndex]:
        return sorted(self._terms, key=grlex_key)

    def coefficient(self, alpha: Sequence[int]) -> float:
        return self._terms.get(MultiIndex(alpha), 0.0)

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        return max((a.degree for a in self._terms), default=-1)

    def is_zero(self) -> bool:
        return not self._terms

    def to_vector(self, basis: "MonomialSet") -> np.ndarray:
        """Coefficient vector over ``basis``; terms outside the basis raise."""
        outside = [a for a in self._terms if a not in basis]
        if outside:
            raise StructureError(f"monomials {outside} are not in the basis")
        return np.array([self.coefficient(a) for a in basis], dtype=float)

    # Arithmetic

    def _check(self, other: "Polynomial") -> None:
        if other.nvars != self.nvars:
            raise DimensionMismatchError(self.nvars, other.nvars, "polynomial")

    def __add__(self, other: Union["Polynomial", float]) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(float(other), self.nvars)
        self._check(other)
        terms = dict(self._terms)
        for a, c in other._terms.items():
            terms[a] = terms.get(a, 0.0) + c
        return Polynomial(terms, self.nvars)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({a: -c for a, c in self._terms.items()}, self.nvars)

    def __sub__(self, other: Union["Polynomial", float]) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(float(other), self.nvars)
        return self + (-other)

    def __rsub__(self, other: float) -> "Polynomial":
        return Polynomial.constant(float(other), self.nvars) - self

    def __mul__(self, other: Union["Polynomial", float]) -> "Polynomial":
        if not isinstance(other, Polynomial):
            return Polynomial({a: c * float(other) for a, c in self._terms.items()}, self.nvars)
        self._check(other)
        terms: Dict[MultiIndex, float] = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                key = a.plus(b)
                terms[key] = terms.get(key, 0.0) + ca * cb
        return Polynomial(terms, self.nvars)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "Polynomial":
        return self * (1.0 / float(scalar))

    def __pow__(self, exponent: int) -> "Polynomial":
        if exponent < 0:
            raise ValueError("negative powers are not polynomials")
        result = Polynomial.constant(1.0, self.nvars)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def shift(self, beta: Sequence[int]) -> "Polynomial":
        """Multiply by the monomial ``x^beta``."""
        return Polynomial({a.plus(beta): c for a, c in self._terms.items()}, self.nvars)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.nvars, frozenset(self._terms.items())))

    def allclose(self, other: "Polynomial", tol: float = 1e-12) -> bool:
        """Coefficient-wise comparison up to an absolute tolerance."""
        self._check(other)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coefficient(a) - other.coefficient(a)) <= tol for a in keys)

    # Evaluation

    def __call__(self, x: Sequence[float]) -> float:
        return eval_poly(self, x)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at each row of an ``(m, nvars)`` array."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.nvars:
            raise DimensionMismatchError(self.nvars, points.shape[1])
        values = np.zeros(points.shape[0])
        for alpha, coeff in self._terms.items():
            values += coeff * np.prod(points ** np.asarray(alpha), axis=1)
        return values

    # Display

    def to_string(self, names: Optional[Sequence[str]] = None, precision: int = 12) -> str:
        if not self._terms:
            return "0"
        pieces = []
        for alpha in self.monomials():
            coeff = self._terms[alpha]
            label = alpha.label(names)
            magnitude = f"{abs(coeff):.{precision}g}"
            if label == "1":
                body = magnitude
            elif magnitude == "1":
                body = label
            else:
                body = f"{magnitude}*{label}"
            sign = "-" if coeff < 0 else "+"
            pieces.append((sign, body))
        first_sign, first_body = pieces[0]
        text = ("-" if first_sign == "-" else "") + first_body
        for sign, body in pieces[1:]:
            text += f" {sign} {body}"
        return text

    def __str__(self) -> str:
        return self.to_string()

    def __repr__(self) -> str:
        return f"Polynomial({self.to_string()!r}, nvars={self.nvars})"


def eval_poly(p: Polynomial, x: Sequence[float]) -> float:
    """Evaluate ``p`` at the point ``x`` term by term.

    Raises:
        DimensionMismatchError: If ``len(x) != p.nvars``
    """
    point = [float(v) for v in np.atleast_1d(x)]
    if len(point) != p.nvars:
        raise DimensionMismatchError(p.nvars, len(point))
    total = 0.0
    for alpha, coeff in p.terms.items():
        total += coeff * math.prod(v**e for v, e in zip(point, alpha))
    return total


class MonomialSet:
    """Finite, duplicate-free set of monomials kept in graded-lex order."""

    __slots__ = ("_indices", "_position", "_nvars")

    def __init__(self, indices: Iterable[Sequence[int]], nvars: Optional[int] = None):
        unique = {MultiIndex(a) for a in indices}
        for alpha in unique:
            if nvars is None:
                nvars = len(alpha)
            elif len(alpha) != nvars:
                raise DimensionMismatchError(nvars, len(alpha), "multi-index")
        if nvars is None:
            raise StructureError("cannot infer the number of variables of an empty monomial set")
        self._nvars = nvars
        self._indices: Tuple[MultiIndex, ...] = tuple(sorted(unique, key=grlex_key))
        self._position = {a: i for i, a in enumerate(self._indices)}

    # Standard families

    @classmethod
    def triangular(cls, nvars: int, degree: int) -> "MonomialSet":
        """The classical set ``{x^alpha : |alpha| <= degree}``."""
        return cls(monomials_up_to(nvars, degree), nvars)

    @classmethod
    def rectangular(cls, caps: Sequence[int]) -> "MonomialSet":
        """``{x^alpha : alpha_i <= caps[i]}``, e.g. ``s^i t^j`` with i <= M, j <= N."""
        return cls(itertools.product(*(range(c + 1) for c in caps)), len(caps))

    @classmethod
    def homogeneous(cls, nvars: int, degree: int) -> "MonomialSet":
        """``{x^alpha : |alpha| = degree}`` together with the unit monomial."""
        return cls(monomials_of_degree(nvars, degree) + [MultiIndex.zero(nvars)], nvars)

    # Container protocol

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def indices(self) -> Tuple[MultiIndex, ...]:
        return self._indices

    def __len__(self) -> int:
        return len(self._indices)

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self._indices)

    def __getitem__(self, i: int) -> MultiIndex:
        return self._indices[i]

    def __contains__(self, alpha: object) -> bool:
        return isinstance(alpha, tuple) and tuple(alpha) in self._position

    def index(self, alpha: Sequence[int]) -> int:
        return self._position[MultiIndex(alpha)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MonomialSet):
            return NotImplemented
        return self._nvars == other._nvars and self._indices == other._indices

    def __hash__(self) -> int:
        return hash((self._nvars, self._indices))

    def __repr__(self) -> str:
        return f"MonomialSet([{', '.join(a.label() for a in self._indices)}])"

    @property
    def max_degree(self) -> int:
        return max((a.degree for a in self._indices), default=-1)

    def labels(self, names: Optional[Sequence[str]] = None) -> List[str]:
        return [a.label(names) for a in self._indices]

    # Set algebra

    def union(self, other: Iterable[Sequence[int]]) -> "MonomialSet":
        return MonomialSet(list(self._indices) + [MultiIndex(a) for a in other], self._nvars)

    def difference(self, other: Iterable[Sequence[int]]) -> "MonomialSet":
        drop = {tuple(a) for a in other}
        return MonomialSet([a for a in self._indices if a not in drop], self._nvars)

    def issubset(self, other: "MonomialSet") -> bool:
        return all(a in other for a in self._indices)

    def sums(self) -> "MonomialSet":
        """``{alpha + beta : alpha, beta in self}``."""
        return MonomialSet(
            [a.plus(b) for i, a in enumerate(self._indices) for b in self._indices[i:]],
            self._nvars,
        )

    def shifted(self) -> "MonomialSet":
        """``C+ = C  u  X_1 C  u ... u  X_n C``."""
        extra = [a.plus(MultiIndex.unit(i, self._nvars)) for a in self._indices for i in range(self._nvars)]
        return self.union(extra)

    def border(self) -> "MonomialSet":
        return border(self)

    def interior(self) -> "MonomialSet":
        """Monomials all of whose one-variable shifts stay in the set."""
        return MonomialSet(
            [a for a in self._indices if all(s in self for s in a.successors())],
            self._nvars,
        )

    def truncate(self, degree: int) -> "MonomialSet":
        return MonomialSet([a for a in self._indices if a.degree <= degree], self._nvars)

    def downward_closure(self) -> "MonomialSet":
        """Smallest downward-closed set containing this one."""
        closure = set()
        for alpha in self._indices:
            closure.update(MultiIndex(e) for e in itertools.product(*(range(x + 1) for x in alpha)))
        return MonomialSet(closure, self._nvars)

    def is_downward_closed(self) -> bool:
        return all(p in self for a in self._indices for p in a.predecessors())

    def is_connected(self) -> bool:
        return is_connected(self)


def is_connected(C: MonomialSet) -> bool:
    """Whether ``C`` is a staircase-connected set containing the unit.

    Every monomial must be reachable from ``1`` by steps that raise a single
    exponent by one while staying inside ``C``.
    """
    if len(C) == 0:
        return False
    zero = MultiIndex.zero(C.nvars)
    if zero not in C:
        return False
    reached = {zero}
    frontier = [zero]
    while frontier:
        alpha = frontier.pop()
        for nxt in alpha.successors():
            if nxt in C and nxt not in reached:
                reached.add(nxt)
                frontier.append(nxt)
    return len(reached) == len(C)


def border(C: MonomialSet) -> MonomialSet:
    """The border ``C+ \\ C`` of a monomial set."""
    return C.shifted().difference(C)
