"""

Service modules for hardyscope.


This package contains the numerical layer: grids and quadrature, potentials,
the spectral heat semigroup, dyadic stopping-time families, condition
certifiers, Riesz transforms, the lemma checkers, Hardy-space functionals,
log-log fits, report emission, configuration parsing, the operator cache and
the worker pool.
"""
