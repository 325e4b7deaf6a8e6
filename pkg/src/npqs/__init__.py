"""Numerical laboratory for N(p,q,s) function spaces on the unit ball of C^n."""

__version__ = "0.1.0"
