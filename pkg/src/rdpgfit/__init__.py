"""First-order solvers for random dot product graph embeddings."""

__version__ = "0.1.0"
