"""Interference-network resource allocation: simulator, DRL regimes, WMMSE benchmark."""

from ._marlin import *  # noqa: F401,F403
from ._marlin import __doc__  # noqa: F401

__version__ = "0.1.0"
