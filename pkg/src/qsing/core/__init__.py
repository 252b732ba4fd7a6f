"""
Shared settings, record types and helpers for qsing
"""

__version__ = "0.1.0"
