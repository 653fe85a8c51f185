"""End-to-end lyrics recognition toolkit."""

__version__ = "0.1.0"
