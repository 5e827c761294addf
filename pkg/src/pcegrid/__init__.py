"""Sparse polynomial chaos surrogates for probabilistic grid resilience studies."""

__version__ = "0.1.0"
