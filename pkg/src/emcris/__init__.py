"""Active RIS with mutual coupling: circuit model, channel statistics and rate optimization."""

__version__ = "0.1.0"
