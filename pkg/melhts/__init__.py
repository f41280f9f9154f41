"""Hybrid HMM mel-spectrogram text-to-speech toolkit."""

__version__ = "0.1.0"
