"""corrlab: exact joint-distribution realizability and locality experiments."""

__version__ = "0.1.0"
