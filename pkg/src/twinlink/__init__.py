"""Desk-scale network digital twin for LoS/NLoS link blockage detection."""
__version__ = "0.1.0"
