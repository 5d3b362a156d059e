"""Sieve toolkit for representations n = p + ab.

Buchstab's function, exponent-space regions, deficit integrals, Buchstab decompositions
and the weight they define, Dirichlet characters and desk-scale representation scans.
"""

from .const import NAME, VERSION

__all__ = ["NAME", "VERSION"]
