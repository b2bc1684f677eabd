"""Translation-invariant self-attention toolkit."""

__version__ = "0.1.0"
