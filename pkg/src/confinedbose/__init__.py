"""Desk-scale laboratory for mean-field limits of strongly confined Bose gases.

The package couples three layers:

* exact N-particle Schrodinger dynamics on tensor grids (``manybody``),
* the effective one-body Hartree / NLS dynamics on the free directions
  (``onebody``) over spectral grids (``grids``),
* the projection-counting machinery that measures condensation and the
  closed-form convergence bounds built on it (``counting``, ``bounds``),

plus a batch experiment harness (``harness``, ``cli``).
"""

from . import bounds, counting, grids, harness, manybody, onebody

__all__ = ["grids", "onebody", "manybody", "counting", "bounds", "harness"]
__version__ = "0.1.0"
