"""Robust stochastic Bayesian game planning over partitioned behavior spaces."""

__version__ = "0.1.0"
