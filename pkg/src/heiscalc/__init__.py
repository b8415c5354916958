"""Exact and numerical calculus on Heisenberg groups.

Subpackage map: core (group structure), scalars (coefficient ring),
exterior (frame exterior algebra), rumin (the subquotient complex),
submanifold (patches, normals, orientations), quadrature and measure
(integration of Heisenberg forms), harness (Stokes verification), cli.
"""

from .core import GroupParams, HomogeneousDistance, Point, VerticalSplitting

__all__ = ["GroupParams", "Point", "HomogeneousDistance", "VerticalSplitting"]
__version__ = "0.1.0"
