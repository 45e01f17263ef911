"""Non-adaptive noisy 20-questions search for a target with piecewise-constant velocity."""

__version__ = "0.1.0"
