"""Learn multi-objective reward functions from Pareto-dominance preferences."""

__version__ = "0.1.0"
