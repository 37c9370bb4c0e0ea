"""Numerics for the two-index fractional Ornstein-Uhlenbeck process."""

from .kernel import ProcessParams
from .specfun import DomainError, SeriesControl, SeriesError

__version__ = "0.1.0"

__all__ = ["ProcessParams", "SeriesControl", "DomainError", "SeriesError", "__version__"]
