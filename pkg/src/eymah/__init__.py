"""Gauged Einstein-Yang-Mills fields on asymptotically hyperbolic manifolds."""

from .fields import ANALYTIC, Analytic, FiniteDifference, TensorField

__version__ = "0.1.0"

__all__ = ["ANALYTIC", "Analytic", "FiniteDifference", "TensorField", "__version__"]
