"""Numerical laboratory for the weak discontinuity of f -> int det(grad f).

Submodules: ``maps`` (map families and Jacobians), ``quadrature`` (ball and
rectangle cubature), ``functionals`` (integral quantities), ``convergence``
(sweeps and pairings) and ``harness`` (CLI, reports, acceptance battery).
"""

__version__ = "0.1.0"
