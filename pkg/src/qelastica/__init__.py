"""Quantized elastica toolkit: KdV hierarchy algebra, loop flows, hyperelliptic
sigma functions and Hill spectra."""

__version__ = "0.1.0"
