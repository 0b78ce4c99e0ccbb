"""Entropic fluctuations in exactly solvable dynamical systems.

Evans-Searles and Gallavotti-Cohen functionals, finite-time fluctuation
symmetries, Green-Kubo transport and large-deviation rate functions for the
thermostated ideal gas, Bernoulli shifts, the half-line dilation, finite
Markov chains and Gaussian systems such as the harmonic chain.
"""

__version__ = "0.1.0"
