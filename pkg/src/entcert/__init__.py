"""Entanglement measures of noisy-channel outputs and perfect-correction certificates."""

__version__ = "0.1.0"
