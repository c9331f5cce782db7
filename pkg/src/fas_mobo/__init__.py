"""Grey-box multi-objective Bayesian optimization for fluid-antenna ISAC configuration."""

__version__ = "0.1.0"
