"""Stochastic polynomial ensembles for quantum signal processing.

Chebyshev coefficient generators, geometric decay envelopes, randomised
ensembles that halve the average polynomial degree, single-qubit QSP and
dense-matrix channel simulation.
"""

__version__ = "0.1.0"
