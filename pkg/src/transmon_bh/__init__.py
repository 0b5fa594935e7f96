"""Attractive Bose-Hubbard dynamics in transmon arrays: exact propagation and effective stack models."""

from .errors import TransmonError
from .units import mhz, to_mhz

__all__ = ["TransmonError", "mhz", "to_mhz"]
