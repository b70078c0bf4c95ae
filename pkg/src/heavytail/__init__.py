"""Regularization, coverings and smallest singular values of heavy-tailed random matrices."""

__version__ = "0.1.0"
