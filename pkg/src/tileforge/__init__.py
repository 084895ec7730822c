"""Tilings of cyclic groups, integer Keller properties and column-free cube tilings."""

__version__ = "0.1.0"
