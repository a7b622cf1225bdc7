"""Numerics for the Moser-Trudinger inequality with an L^N-norm perturbation on R^N."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .dims import Dimension, make_dimension
from .functional import FunctionalParams, mt_functional
from .radial import RadialGrid, RadialProfile

__all__ = [
    "Dimension",
    "FunctionalParams",
    "RadialGrid",
    "RadialProfile",
    "make_dimension",
    "mt_functional",
    "__version__",
]
