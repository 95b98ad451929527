"""Bayesian multiple-output directional quantile regression for ATP match data."""

__version__ = "0.1.0"
