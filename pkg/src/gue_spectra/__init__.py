"""Determinantal machinery for GUE eigenvalue statistics.

Finite-n kernels, Fredholm determinants over scaled spectral windows,
joint eigenvalue-counting probabilities, GUE samplers, and the
Tracy-Widom limit laws needed to check the counting measures'
asymptotic independence at desk scale.
"""

__version__ = "0.1.0"
