"""hardyscope: numerical Hardy-space toolkit for 1D Schrödinger operators."""

__version__ = "0.1.0"
