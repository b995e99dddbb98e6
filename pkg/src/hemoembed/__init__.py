"""Triplet-trained causal convolutional embeddings of multichannel vital-sign series."""

__version__ = "0.1.0"
