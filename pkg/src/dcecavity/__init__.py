"""Photon generation from vacuum in a modulated cavity with a ladder detector."""

__version__ = "0.1.0"
