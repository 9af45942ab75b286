"""Excitation-conserving spin-chain state transfer with a controllable extended receiver."""

__version__ = "0.1.0"
