"""Simulation and verification toolkit for the spatial Chinese-restaurant-like
process built from the Polya sum process."""

__version__ = "0.1.0"
