"""Brine inclusions in sea ice: phase-field model and axisymmetric Stefan reduction."""
from .model import ModelParams, DomainError, TABLE_OF_PARAMETERS

__all__ = ["ModelParams", "DomainError", "TABLE_OF_PARAMETERS"]
__version__ = "0.1.0"
