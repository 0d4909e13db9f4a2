"""Spike-and-slab Bayesian variable selection and a posterior-consistency laboratory."""

__version__ = "0.1.0"
