"""Deterministic simulator of a ledger-backed SDN control plane."""

__version__ = "0.1.0"
