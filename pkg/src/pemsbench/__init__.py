"""Predictive emission monitoring benchmark: eight regressors for CO and NOx."""

__version__ = "0.1.0"
