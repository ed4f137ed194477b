"""Secure two-party fixed-point math over mixed-bitwidth rings."""

__version__ = "0.1.0"
