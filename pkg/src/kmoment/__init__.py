"""kmoment: certificates for truncated moment problems."""

__version__ = "0.1.0"
