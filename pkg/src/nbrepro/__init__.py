"""Negative Binomial law of the individual reproduction number from reported counts."""

__version__ = "0.1.0"
