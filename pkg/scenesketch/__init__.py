"""Vector scene sketches across fidelity and simplicity levels."""

__version__ = "0.1.0"
