"""Exact tools for secure capacity questions on noiseless wiretap networks."""

__version__ = "0.1.0"
