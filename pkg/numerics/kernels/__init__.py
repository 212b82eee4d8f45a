from . import grid
from . import sparse
from . import operators
from . import lfa
from . import adsc

__all__ = (
    "grid",
    "sparse",
    "operators",
    "lfa",
    "adsc",
)
