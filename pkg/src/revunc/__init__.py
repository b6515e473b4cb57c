"""Macroeconomic uncertainty from the news component of GDP revisions."""

__version__ = "0.1.0"
