"""Strong unitary designs: exact Haar oracles, constructions and diagnostics."""

__version__ = "0.1.0"
