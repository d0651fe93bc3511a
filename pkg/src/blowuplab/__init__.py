"""blowuplab: numerical tools for bubble blow-up in the nearly-critical
elliptic problem -Delta u + V u = u^(p - eps) on a bounded domain.

The package covers the finite-dimensional side of the theory: dimensional
constants, bubble interactions, the leading-order balancing system, the
Kirchhoff-Routh cluster functional, and an independent radial-PDE check of
the blow-up-rate law.
"""

__version__ = "0.1.0"

from . import (balancing, bubbles, cli, constants, kirchhoff, numerics,
               potentials, radial)

__all__ = [
    "balancing",
    "bubbles",
    "cli",
    "constants",
    "kirchhoff",
    "numerics",
    "potentials",
    "radial",
]
