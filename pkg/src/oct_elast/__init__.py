"""Forward simulation and layer-stripping inversion of elastographic OCT data."""

from . import errors
from .errors import OctElastError

__version__ = "0.1.0"

__all__ = ["errors", "OctElastError", "__version__"]
