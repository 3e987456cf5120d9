"""Command-line interface for kmoment."""
