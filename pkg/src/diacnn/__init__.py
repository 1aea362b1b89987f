"""Residual CNN toolkit for fundus-image classification, built on numpy."""

from diacnn.tensor import Tensor, backward, check_finite

__version__ = "0.1.0"

__all__ = ["Tensor", "backward", "check_finite", "__version__"]
