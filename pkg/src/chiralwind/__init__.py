"""Numerical laboratory for winding-number statistics of chiral random matrix fields.

Two independent routes to the same observables:

* a Monte Carlo route — sample real Ginibre pairs, build the off-diagonal
  block K(p) = a(p) K1 + b(p) K2 of a chiral Hamiltonian, and estimate
  winding statistics and determinant-ratio generating functions directly;
* an analytic route — evaluate the same generating functions through a
  Pfaffian built from three kernel functions, each reduced to low-dimensional
  quadrature.

The package cross-validates the two routes within quantified tolerances.
"""

from __future__ import annotations

__version__ = "0.1.0"
