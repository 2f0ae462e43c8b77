"""Time-aware cross-network recommendation with a listwise mean/variance
ranking criterion for implicit feedback."""

__version__ = "0.1.0"
