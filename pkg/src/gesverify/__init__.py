"""Local-measurement verification of the GHZ-W subspace and of two-qubit subspaces."""

__version__ = "0.1.0"
