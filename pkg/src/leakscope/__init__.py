"""Information-leakage metrics for a small probabilistic language."""

__version__ = "0.1.0"
