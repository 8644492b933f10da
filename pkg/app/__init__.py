"""
ESA radar observation-time allocation package
"""

__version__ = "1.0.0"
