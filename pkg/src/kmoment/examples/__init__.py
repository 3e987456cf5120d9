"""Example problem files shipped with kmoment."""
