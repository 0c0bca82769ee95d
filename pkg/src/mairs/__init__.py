"""Worst-case coverage design for IRS-aided movable-antenna transmitters."""

__version__ = "0.1.0"
