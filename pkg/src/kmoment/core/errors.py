"""Exception types raised by the kmoment core.

Mathematical verdicts (a moment sequence without a representing measure, a
refused completion) are returned as values. The exceptions below signal
structural problems with the inputs themselves.
"""

from typing import Iterable, List, Optional, Sequence, Tuple


class KMomentError(ValueError):
    """Base class for all kmoment errors."""


class DimensionMismatchError(KMomentError):
    """A point or multi-index has the wrong number of coordinates."""

    def __init__(self, expected: int, got: int, what: str = "point"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} has dimension {got}, expected {expected}")


class StructureError(KMomentError):
    """Malformed problem data (empty basis, missing total mass, ...)."""


class MissingMomentError(KMomentError):
    """One or more moments needed by an operation are not available.

    Attributes:
        indices: The missing multi-indices, in graded-lex order
        pairs: For matrix assembly, the (row, column) label pairs that needed them
    """

    def __init__(
        self,
        indices: Iterable[Tuple[int, ...]],
        pairs: Optional[Sequence[Tuple[Tuple[int, ...], Tuple[int, ...]]]] = None,
    ):
        self.indices: List[Tuple[int, ...]] = sorted(
            set(tuple(i) for i in indices), key=lambda a: (sum(a), [-e for e in a])
        )
        self.pairs = list(pairs or [])
        shown = ", ".join(str(i) for i in self.indices[:8])
        more = "" if len(self.indices) <= 8 else f" (+{len(self.indices) - 8} more)"
        message = f"missing moment(s) {shown}{more}"
        if self.pairs:
            row, col = self.pairs[0]
            message += f"; first needed by entry ({row}, {col})"
        super().__init__(message)


class NestingError(KMomentError):
    """A basis that should contain another one does not."""


class ExtensionError(KMomentError):
    """The single-branch flat-extension construction broke down.

    Attributes:
        stage: One of "consistency", "range", "structure", "psd", "flatness"
        detail: Numeric payload describing the failure
    """

    def __init__(self, stage: str, message: str, detail: Optional[dict] = None):
        self.stage = stage
        self.detail = detail or {}
        super().__init__(f"{stage}: {message}")


class ExtractionError(KMomentError):
    """Atoms could not be extracted from a flat moment matrix."""

    def __init__(self, reason: str, message: str, detail: Optional[dict] = None):
        self.reason = reason
        self.detail = detail or {}
        super().__init__(f"{reason}: {message}")


class MissingWeightError(KMomentError):
    """A weighted-shift weight needed on a moment path was not supplied."""

    def __init__(self, direction: str, k: Tuple[int, int]):
        self.direction = direction
        self.k = k
        super().__init__(f"missing {direction} weight at k={k}")


class ProblemFileError(KMomentError):
    """A problem file failed to parse or validate.

    Attributes:
        line: 1-based line number of the offending value, when known
        field: Dotted path of the offending field, when known
    """

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")
