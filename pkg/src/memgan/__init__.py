"""In-situ GAN training on simulated passive RRAM crossbars."""

__version__ = "0.1.0"
