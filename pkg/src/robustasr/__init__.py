"""Noise-robust speech recognition with a jointly trained GAN enhancement front-end."""

__version__ = "0.1.0"
