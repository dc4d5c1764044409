"""Exchange algorithm sampler library with an exact finite-chain analysis engine."""

__version__ = "0.1.0"
