"""Population recovery from lossy and noisy samples via minimax linear estimators."""

__version__ = "0.1.0"
