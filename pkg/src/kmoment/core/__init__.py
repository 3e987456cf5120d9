"""Numerical core of kmoment: polynomials, moment matrices, extensions and extraction."""
