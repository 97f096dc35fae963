"""iqpbp: trainability analysis for IQP circuit Born machines."""

__version__ = "0.1.0"

from .errors import CapacityError, DimensionError
from .gf2 import BitVec

__all__ = ["BitVec", "CapacityError", "DimensionError", "__version__"]
