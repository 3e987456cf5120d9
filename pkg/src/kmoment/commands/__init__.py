"""kmoment command implementations."""

from kmoment.commands import check, dominate, extract, frame, scp, solve  # noqa: F401
