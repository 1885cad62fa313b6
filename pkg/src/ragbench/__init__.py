"""RAG pipeline engine and configuration-grid benchmark harness."""

__version__ = "0.1.0"
