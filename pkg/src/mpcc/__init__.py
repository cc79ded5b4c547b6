"""Numerical toolkit for mountain-pass levels of semilinear elliptic
energy functionals: sphere-constrained maximizers, path-deformation
level estimates, penalty-condition experiments and profile
decompositions of bounded sequences under translations and dilations.
"""

__version__ = "0.1.0"
