"""Bulk multicast transfer scheduling: models, schedulers, simulator, harness."""

__version__ = "0.1.0"
