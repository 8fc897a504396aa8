"""Dynamic-graph embeddings from a warm-started, growable deep autoencoder."""

__version__ = "0.1.0"

__all__ = ["__version__"]
