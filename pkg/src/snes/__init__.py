"""Distributed SPARQL processing over simulated networks of small devices."""

__version__ = "0.1.0"
