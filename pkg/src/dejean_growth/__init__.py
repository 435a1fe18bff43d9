"""Certified lower bounds on the growth rate of Dejean words."""

__version__ = "0.1.0"
