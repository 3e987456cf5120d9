"""Problem-file parser for moment, weight-diagram and frame problems.

Problem files are JSON documents keyed by exponent vectors, for example::

    {
      "nvars": 1,
      "moments": [{"index": [0], "value": 1.0}, {"index": [1], "value": 0.5}],
      "constraints": [{"name": "1-X", "terms": [{"index": [0], "coeff": 1},
                                                {"index": [1], "coeff": -1}]}],
      "options": {"depth": 2}
    }

Every parse or validation problem is raised as a ``ProblemFileError`` that
names the line and field of the offending value.
"""

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from kmoment.core.config import SolveOptions
from kmoment.core.errors import KMomentError, ProblemFileError
from kmoment.core.matrices import Constraint
from kmoment.core.moments import MomentSequence
from kmoment.core.poly import MonomialSet, MultiIndex, Polynomial
from kmoment.core.scp import TailSpec, WeightFamily

Path_ = Tuple[Union[str, int], ...]

_WHITESPACE = re.compile(r"[ \t\n\r]*")


class MomentRecord(BaseModel):
    """One ``gamma_alpha``."""

    model_config = ConfigDict(extra="forbid")

    index: List[int]
    value: float

    @field_validator("index")
    @classmethod
    def validate_index(cls, value: List[int]) -> List[int]:
        """Exponents are non-negative."""
        if any(e < 0 for e in value):
            raise ValueError(f"exponent vector {value} has a negative entry")
        return value


class TermRecord(BaseModel):
    """One ``coeff * x^index`` term of a constraint polynomial."""

    model_config = ConfigDict(extra="forbid")

    index: List[int]
    coeff: float

    @field_validator("index")
    @classmethod
    def validate_index(cls, value: List[int]) -> List[int]:
        """Exponents are non-negative."""
        if any(e < 0 for e in value):
            raise ValueError(f"exponent vector {value} has a negative entry")
        return value


class ConstraintRecord(BaseModel):
    """A named polynomial ``g`` describing ``{g >= 0}``."""

    model_config = ConfigDict(extra="forbid")

    name: str = "g"
    terms: List[TermRecord] = Field(..., min_length=1)


class MomentProblemFile(BaseModel):
    """Schema of ``check``/``solve``/``extract`` problem files."""

    model_config = ConfigDict(extra="forbid")

    nvars: int = Field(..., ge=1, description="Number of variables")
    monomials: Optional[List[List[int]]] = Field(None, description="Monomial set C")
    moments: List[MomentRecord] = Field(..., min_length=1)
    constraints: List[ConstraintRecord] = Field(default_factory=list)
    hint: List[MomentRecord] = Field(default_factory=list, description="Prior extension values")
    options: Dict[str, Any] = Field(default_factory=dict)


class WeightRecord(BaseModel):
    """One weighted-shift weight."""

    model_config = ConfigDict(extra="forbid")

    direction: str
    k1: int = Field(..., ge=0)
    k2: int = Field(..., ge=0)
    weight: float = Field(..., gt=0, le=1)

    @field_validator("direction")
    @classmethod
    def validate_direction(cls, value: str) -> str:
        """Only the two shift directions exist."""
        if value not in ("alpha", "beta"):
            raise ValueError(f"direction must be 'alpha' or 'beta', got '{value}'")
        return value


class ScpProblemFile(BaseModel):
    """Schema of ``scp`` weight-diagram files."""

    model_config = ConfigDict(extra="forbid")

    weights: List[WeightRecord] = Field(..., min_length=1)
    tails: List[TailSpec] = Field(default_factory=list)
    kmax: Optional[int] = Field(None, ge=1)
    options: Dict[str, Any] = Field(default_factory=dict)


class FrameLevel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    moments: List[MomentRecord] = Field(..., min_length=1)


class FrameProblemFile(BaseModel):
    """Schema of ``frame`` files: nested truncations of one functional."""

    model_config = ConfigDict(extra="forbid")

    nvars: int = Field(..., ge=1)
    levels: List[FrameLevel] = Field(..., min_length=1)
    constraints: List[ConstraintRecord] = Field(default_factory=list)
    options: Dict[str, Any] = Field(default_factory=dict)


@dataclass
class MomentProblem:
    """A parsed moment problem ready for the pipeline."""

    gamma: MomentSequence
    monomials: MonomialSet
    constraints: List[Constraint] = field(default_factory=list)
    hint: Dict[MultiIndex, float] = field(default_factory=dict)
    options: Dict[str, Any] = field(default_factory=dict)
    source: Optional[Path] = None


@dataclass
class ScpProblem:
    weights: WeightFamily
    kmax: Optional[int] = None
    options: Dict[str, Any] = field(default_factory=dict)
    source: Optional[Path] = None


@dataclass
class FrameProblem:
    levels: List[MomentSequence]
    constraints: List[Constraint] = field(default_factory=list)
    options: Dict[str, Any] = field(default_factory=dict)
    source: Optional[Path] = None


def locate_lines(text: str) -> Dict[Path_, int]:
    """Map every value path of a valid JSON document to its 1-based line."""
    lines: Dict[Path_, int] = {}
    decoder = json.JSONDecoder()

    def skip(i: int) -> int:
        return _WHITESPACE.match(text, i).end()  # type: ignore[union-attr]

    def walk(i: int, path: Path_) -> int:
        i = skip(i)
        lines[path] = text.count("\n", 0, i) + 1
        opener = text[i]
        if opener in "{[":
            closer = "}" if opener == "{" else "]"
            i = skip(i + 1)
            if text[i] == closer:
                return i + 1
            position = 0
            while True:
                i = skip(i)
                if opener == "{":
                    key, i = json.decoder.scanstring(text, i + 1)  # type: ignore[attr-defined]
                    i = skip(i) + 1
                    i = walk(i, path + (key,))
                else:
                    i = walk(i, path + (position,))
                    position += 1
                i = skip(i)
                if text[i] == ",":
                    i += 1
                    continue
                return i + 1
        _, end = decoder.raw_decode(text, i)
        return end

    walk(0, ())
    return lines


def _line_for(lines: Dict[Path_, int], path: Sequence[Union[str, int]]) -> Optional[int]:
    path = tuple(path)
    while path not in lines and path:
        path = path[:-1]
    return lines.get(path)


def _dotted(path: Sequence[Union[str, int]]) -> str:
    return ".".join(str(p) for p in path)


def _read(path: Path) -> Tuple[Any, Dict[Path_, int]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ProblemFileError(f"cannot read {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemFileError(f"invalid JSON: {e.msg}", line=e.lineno) from e
    return data, locate_lines(text)


def _validate(model: Any, data: Any, lines: Dict[Path_, int]) -> Any:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        loc = first.get("loc", ())
        raise ProblemFileError(first.get("msg", str(e)), _line_for(lines, loc), _dotted(loc) or None) from e


class _Builder:
    """Semantic checks that need the parsed numbers, with located errors."""

    def __init__(self, lines: Dict[Path_, int], nvars: int):
        self.lines = lines
        self.nvars = nvars

    def fail(self, message: str, path: Sequence[Union[str, int]]) -> ProblemFileError:
        return ProblemFileError(message, _line_for(self.lines, path), _dotted(path))

    def index(self, index: List[int], path: Sequence[Union[str, int]]) -> MultiIndex:
        if len(index) != self.nvars:
            raise self.fail(f"exponent vector {index} has {len(index)} entries, expected {self.nvars}", path)
        return MultiIndex(index)

    def moments(self, records: List[MomentRecord], base: Path_) -> MomentSequence:
        values: Dict[MultiIndex, float] = {}
        for k, record in enumerate(records):
            alpha = self.index(record.index, base + (k, "index"))
            if alpha in values:
                raise self.fail(f"duplicate moment for exponent vector {list(alpha)}", base + (k, "index"))
            values[alpha] = record.value
        try:
            return MomentSequence(values, self.nvars)
        except KMomentError as e:
            raise self.fail(str(e), base) from e

    def constraints(self, records: List[ConstraintRecord]) -> List[Constraint]:
        parsed = []
        for k, record in enumerate(records):
            terms: Dict[MultiIndex, float] = {}
            for j, term in enumerate(record.terms):
                alpha = self.index(term.index, ("constraints", k, "terms", j, "index"))
                terms[alpha] = terms.get(alpha, 0.0) + term.coeff
            try:
                parsed.append(Constraint(g=Polynomial(terms, self.nvars), name=record.name))
            except (ValidationError, KMomentError) as e:
                raise self.fail(f"constraint '{record.name}' is invalid: {e}", ("constraints", k)) from e
        return parsed

    def options(self, options: Dict[str, Any]) -> Dict[str, Any]:
        unknown = [key for key in options if key not in SolveOptions.model_fields]
        if unknown:
            raise self.fail(f"unknown option(s): {', '.join(unknown)}", ("options", unknown[0]))
        try:
            SolveOptions(**options)
        except ValidationError as e:
            first = e.errors()[0]
            raise self.fail(first.get("msg", str(e)), ("options",) + tuple(first.get("loc", ()))) from e
        return dict(options)


def load_problem(path: Union[str, Path]) -> MomentProblem:
    """Parse a moment problem file.

    Raises:
        ProblemFileError: With the line and field of the first problem found
    """
    path = Path(path)
    data, lines = _read(path)
    spec = _validate(MomentProblemFile, data, lines)
    build = _Builder(lines, spec.nvars)

    gamma = build.moments(spec.moments, ("moments",))
    if spec.monomials is not None:
        monomials = MonomialSet(
            [build.index(m, ("monomials", k)) for k, m in enumerate(spec.monomials)], spec.nvars
        )
        absent = [a for a in monomials if a not in gamma]
        if absent:
            raise build.fail(
                f"monomial set names {len(absent)} index(es) without a moment, first {list(absent[0])}",
                ("monomials",),
            )
    else:
        monomials = gamma.support

    hint = {build.index(r.index, ("hint", k, "index")): r.value for k, r in enumerate(spec.hint)}
    return MomentProblem(
        gamma=gamma,
        monomials=monomials,
        constraints=build.constraints(spec.constraints),
        hint=hint,
        options=build.options(spec.options),
        source=path,
    )


def load_scp(path: Union[str, Path]) -> ScpProblem:
    """Parse a weight-diagram file."""
    path = Path(path)
    data, lines = _read(path)
    spec = _validate(ScpProblemFile, data, lines)
    build = _Builder(lines, 2)
    seen = set()
    for k, record in enumerate(spec.weights):
        key = (record.direction, record.k1, record.k2)
        if key in seen:
            raise build.fail(f"duplicate {record.direction} weight at ({record.k1}, {record.k2})", ("weights", k))
        seen.add(key)
    weights = WeightFamily.from_records([r.model_dump() for r in spec.weights], spec.tails)
    return ScpProblem(weights, spec.kmax, build.options(spec.options), path)


def load_frame(path: Union[str, Path]) -> FrameProblem:
    """Parse a multi-level frame file."""
    path = Path(path)
    data, lines = _read(path)
    spec = _validate(FrameProblemFile, data, lines)
    build = _Builder(lines, spec.nvars)
    levels = [build.moments(level.moments, ("levels", k, "moments")) for k, level in enumerate(spec.levels)]
    return FrameProblem(levels, build.constraints(spec.constraints), build.options(spec.options), path)


def parse_alpha(text: str) -> MultiIndex:
    """Parse a CLI exponent vector such as ``"3"`` or ``"1,1"``."""
    try:
        parts = [int(p) for p in text.replace(" ", "").split(",") if p != ""]
    except ValueError as e:
        raise ProblemFileError(f"exponent vector must be comma-separated integers, got '{text}'") from e
    if not parts or any(p < 0 for p in parts):
        raise ProblemFileError(f"exponent vector must be non-empty and non-negative, got '{text}'")
    return MultiIndex(parts)
