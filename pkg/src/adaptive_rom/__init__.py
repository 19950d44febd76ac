"""Adaptive POD-Greedy-(D)EIM model order reduction with output error indicators."""

__version__ = "0.1.0"
