"""Exact computations with cube groups, sampling measures and fibrations of filtered abelian 2-groups."""

__version__ = "0.1.0"
