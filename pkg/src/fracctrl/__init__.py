"""Controlled neutral time-fractional stochastic heat equations with infinite delay and fBm noise."""

__version__ = "0.1.0"
