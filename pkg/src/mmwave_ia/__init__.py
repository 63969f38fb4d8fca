"""mmWave initial-access simulator: beam codebook, channel, receiver datasets,
exhaustive-sweep and learned beam selection, beam-subset search and evaluation."""

__version__ = "0.1.0"
