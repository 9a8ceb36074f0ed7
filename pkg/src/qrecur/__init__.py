"""Monitored recurrence of quantum walks and the matrix Schur functions behind it."""

__version__ = "0.1.0"
