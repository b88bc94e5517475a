"""Numerical verification of curvature identities on OT-FKM focal submanifolds."""

__version__ = "0.1.0"
