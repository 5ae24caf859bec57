"""Refit layered outfits from a source body to a target body."""

__version__ = "0.1.0"
