"""Error types shared across the package."""


class DimensionError(ValueError):
    """Operands have incompatible bit lengths or an invalid dimension."""


class CapacityError(RuntimeError):
    """A computation would exceed its enumeration or memory cap."""
