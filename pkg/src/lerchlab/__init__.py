"""Numerical toolkit for additively twisted Dirichlet series and their zeros at sigma > 1."""

from __future__ import annotations

__version__ = "0.1.0"
