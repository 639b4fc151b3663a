"""Simulation and analysis of squeezed-light magnetic circular dichroism polarimetry."""

__version__ = "0.1.0"
