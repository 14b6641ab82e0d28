"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateInputError(DomainError):
    """Input carries no usable mass (e.g. an all-zero probability vector)."""


class ConsistencyError(RuntimeError):
    """Internal state no longer matches its defining invariants."""
