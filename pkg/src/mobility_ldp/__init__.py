"""Long-time statistics of mobility-driven wireless metrics via large deviations."""

__version__ = "0.1.0"
