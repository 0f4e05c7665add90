"""Conditional-GAN damage detection and vibration-signal twinning."""

__version__ = "0.1.0"
