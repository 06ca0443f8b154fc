"""Feller measures, Douglas integrals and excursion censuses on model domains."""

__version__ = "0.1.0"
