"""Cross-lingual retrieval via multilingual embeddings learned from topically aligned test collections."""

__version__ = "0.1.0"
