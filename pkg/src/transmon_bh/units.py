"""Unit helpers.

Internally every rate is an angular frequency in rad/us and every time is in
microseconds, with hbar = 1. Interfaces speak MHz (cycles per microsecond).
"""

import math

TWO_PI = 2.0 * math.pi


def mhz(value):
    """Cycles/us -> rad/us. Works on scalars and numpy arrays."""
    return TWO_PI * value


def to_mhz(value):
    return value / TWO_PI
