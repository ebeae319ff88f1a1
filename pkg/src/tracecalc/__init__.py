"""Regularized-trace calculus for suspended operator families at desk scale."""

__version__ = "0.1.0"
